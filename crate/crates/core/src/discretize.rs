//! Top-down multi-granularity discretization of input variables.
//!
//! Each step adds the single split point that best reduces the error of
//! piecewise least-squares lines, and BIC picks how many granularities are
//! kept.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// Minimum number of examples on each side of a candidate split.
pub const MIN_INTERVAL: usize = 30;

/// Floor applied to the summed MSE before taking its logarithm.
const MSE_FLOOR: f64 = 1e-12;

/// Nested split-point sets `C^1 ⊂ C^2 ⊂ … ⊂ C^chosen_max` for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularityLadder {
    pub variable: usize,
    /// Entry `g - 1` holds the sorted split set of granularity `g`,
    /// domain endpoints included.
    pub splits_per_granularity: Vec<Vec<f64>>,
    pub chosen_max: usize,
    /// BIC of every granularity generated during the search, including
    /// those past `chosen_max`.
    pub bic_trace: Vec<f64>,
}

impl GranularityLadder {
    pub fn max_granularity(&self) -> usize {
        self.chosen_max
    }

    /// Split set of granularity `g` (1-based).
    pub fn splits(&self, g: usize) -> &[f64] {
        &self.splits_per_granularity[g - 1]
    }

    pub fn domain(&self) -> (f64, f64) {
        let c1 = &self.splits_per_granularity[0];
        (c1[0], c1[c1.len() - 1])
    }
}

fn mean(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = v.clone().count() as f64;
    v.sum::<f64>() / n
}

/// Total squared residual of the least-squares line through `points`.
/// Falls back to an intercept-only model when all `x` coincide.
pub fn interval_fit_se(points: &[(f64, f64)]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mx = mean(points.iter().map(|p| p.0));
    let my = mean(points.iter().map(|p| p.1));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let all_same_x = points.iter().all(|p| p.0 == points[0].0);
    if all_same_x || sxx == 0.0 {
        return syy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    points
        .iter()
        .map(|&(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum()
}

/// Mean squared residual of the least-squares line through `points`.
pub fn interval_fit_mse(points: &[(f64, f64)]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    interval_fit_se(points) / points.len() as f64
}

/// Size-weighted squared error of separate lines on each side of `c`.
/// Returns `None` when either side holds fewer than [`MIN_INTERVAL`] points.
pub fn linear_error(points: &[(f64, f64)], c: f64) -> Option<f64> {
    let left: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 < c).collect();
    let right: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 > c).collect();
    if left.len() < MIN_INTERVAL || right.len() < MIN_INTERVAL {
        return None;
    }
    let n = points.len() as f64;
    Some(
        interval_fit_se(&left) * left.len() as f64 / n
            + interval_fit_se(&right) * right.len() as f64 / n,
    )
}

/// Prefix sums over x-sorted, globally centred data, giving O(1) squared
/// error of a least-squares line on any contiguous range.
struct PrefixFits {
    x: Vec<f64>,
    sx: Vec<f64>,
    sy: Vec<f64>,
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    syy: Vec<f64>,
}

impl PrefixFits {
    fn new(sorted: &[(f64, f64)]) -> Self {
        let mx = mean(sorted.iter().map(|p| p.0));
        let my = mean(sorted.iter().map(|p| p.1));
        let n = sorted.len();
        let mut s = PrefixFits {
            x: sorted.iter().map(|p| p.0).collect(),
            sx: vec![0.0; n + 1],
            sy: vec![0.0; n + 1],
            sxx: vec![0.0; n + 1],
            sxy: vec![0.0; n + 1],
            syy: vec![0.0; n + 1],
        };
        for (i, &(x, y)) in sorted.iter().enumerate() {
            let (x, y) = (x - mx, y - my);
            s.sx[i + 1] = s.sx[i] + x;
            s.sy[i + 1] = s.sy[i] + y;
            s.sxx[i + 1] = s.sxx[i] + x * x;
            s.sxy[i + 1] = s.sxy[i] + x * y;
            s.syy[i + 1] = s.syy[i] + y * y;
        }
        s
    }

    /// Squared error of the line fitted on `lo..hi`.
    fn se(&self, lo: usize, hi: usize) -> f64 {
        let n = (hi - lo) as f64;
        if hi <= lo + 1 {
            return 0.0;
        }
        let sx = self.sx[hi] - self.sx[lo];
        let sy = self.sy[hi] - self.sy[lo];
        let syy = (self.syy[hi] - self.syy[lo]) - sy * sy / n;
        if self.x[lo] == self.x[hi - 1] {
            return syy.max(0.0);
        }
        let sxx = (self.sxx[hi] - self.sxx[lo]) - sx * sx / n;
        let sxy = (self.sxy[hi] - self.sxy[lo]) - sx * sy / n;
        if sxx <= 0.0 {
            return syy.max(0.0);
        }
        (syy - sxy * sxy / sxx).max(0.0)
    }

    fn mse(&self, lo: usize, hi: usize) -> f64 {
        self.se(lo, hi) / (hi - lo) as f64
    }

    /// Best admissible cut of `lo..hi` as `(cut index, split value, error)`.
    fn best_cut(&self, lo: usize, hi: usize) -> Option<(usize, f64, f64)> {
        if hi - lo < 2 * MIN_INTERVAL {
            return None;
        }
        let n = (hi - lo) as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        for k in lo + MIN_INTERVAL..=hi - MIN_INTERVAL {
            if self.x[k - 1] == self.x[k] {
                continue;
            }
            let err = self.se(lo, k) * (k - lo) as f64 / n + self.se(k, hi) * (hi - k) as f64 / n;
            if best.is_none_or(|b| err < b.2) {
                best = Some((k, 0.5 * (self.x[k - 1] + self.x[k]), err));
            }
        }
        best
    }
}

/// Error term of the BIC for a multi-interval discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicError {
    /// Each interval's MSE weighted by its share of the examples, i.e. the
    /// MSE of the piecewise-linear model over the whole variable.
    #[default]
    Pooled,
    /// Plain sum of the per-interval MSEs.
    Summed,
}

fn bic(n: usize, summed_mse: f64, penalty_terms: f64) -> f64 {
    let n = n as f64;
    n * summed_mse.max(MSE_FLOOR).ln() + penalty_terms * 2.0 * n.ln()
}

/// Builds the granularity ladder of one variable from paired samples.
pub fn discretize_variable(x: &[f64], y: &[f64]) -> GranularityLadder {
    discretize_variable_with(x, y, BicError::default())
}

pub fn discretize_variable_with(x: &[f64], y: &[f64], error: BicError) -> GranularityLadder {
    assert_eq!(x.len(), y.len(), "x and y must have equal length");
    assert!(!x.is_empty(), "cannot discretize an empty variable");
    let mut sorted: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let fits = PrefixFits::new(&sorted);

    // Cut indices into `sorted`; interval i is cuts[i]..cuts[i + 1].
    let mut cuts = vec![0, n];
    let mut splits = vec![sorted[0].0, sorted[n - 1].0];
    let mut ladder = vec![splits.clone()];
    let mut bic_trace = vec![bic(n, fits.mse(0, n), 1.0)];
    let mut best_g = 1;
    let mut it_wi = 0usize;

    loop {
        let candidate = cuts
            .windows(2)
            .enumerate()
            .filter_map(|(i, w)| fits.best_cut(w[0], w[1]).map(|c| (i, c)))
            .fold(None, |acc: Option<(usize, (usize, f64, f64))>, cur| match acc {
                Some(a) if a.1 .2 <= cur.1 .2 => Some(a),
                _ => Some(cur),
            });
        let Some((interval, (cut, value, _))) = candidate else {
            break;
        };
        cuts.insert(interval + 1, cut);
        splits.insert(interval + 1, value);
        ladder.push(splits.clone());
        let g = ladder.len();
        let summed: f64 = match error {
            BicError::Pooled => cuts.windows(2).map(|w| fits.se(w[0], w[1])).sum::<f64>() / n as f64,
            BicError::Summed => cuts.windows(2).map(|w| fits.mse(w[0], w[1])).sum(),
        };
        let b = bic(n, summed, (splits.len() - 2) as f64);
        bic_trace.push(b);
        if b < bic_trace[best_g - 1] {
            it_wi = 0;
            best_g = g;
        } else {
            it_wi += 1;
        }
        if it_wi as f64 > ((n as f64 / MIN_INTERVAL as f64) / best_g as f64).sqrt() {
            break;
        }
    }
    ladder.truncate(best_g);
    GranularityLadder {
        variable: 0,
        splits_per_granularity: ladder,
        chosen_max: best_g,
        bic_trace,
    }
}

/// Discretizes every input variable of `d` independently.
pub fn discretize_dataset(d: &Dataset) -> Vec<GranularityLadder> {
    discretize_dataset_with(d, BicError::default())
}

pub fn discretize_dataset_with(d: &Dataset, error: BicError) -> Vec<GranularityLadder> {
    (0..d.p())
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = d.x.iter().map(|row| row[j]).collect();
            GranularityLadder {
                variable: j,
                ..discretize_variable_with(&column, &d.y, error)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fit_mse_examples() {
        let line: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!(interval_fit_mse(&line) < 1e-24);
        let tent = [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)];
        assert!((interval_fit_mse(&tent) - 2.0 / 9.0).abs() < 1e-15);
        let flat = [(0.0, 4.0), (1.0, 4.0), (5.0, 4.0)];
        assert_eq!(interval_fit_mse(&flat), 0.0);
        let vertical = [(1.0, 0.0), (1.0, 2.0)];
        assert_eq!(interval_fit_mse(&vertical), 1.0);
    }

    #[test]
    fn linear_error_is_zero_at_kink_and_flat_on_lines() {
        let kinked: Vec<(f64, f64)> = (0..100)
            .map(|i| {
                let x = i as f64 - 49.5;
                (x, if x < 0.0 { -x } else { 2.0 * x })
            })
            .collect();
        assert!(linear_error(&kinked, 0.0).unwrap() < 1e-18);
        assert!(linear_error(&kinked, 20.0).unwrap() > 1.0);
        let line: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 0.5 * i as f64)).collect();
        for c in [30.5, 50.5, 69.5] {
            assert!(linear_error(&line, c).unwrap() < 1e-18);
        }
        assert_eq!(linear_error(&line, 10.5), None);
    }

    #[test]
    fn abs_curve_scan_finds_zero() {
        let pts: Vec<(f64, f64)> = (0..600)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 599.0;
                (x, x.abs())
            })
            .collect();
        let mut best = (f64::INFINITY, 0.0);
        for w in pts.windows(2) {
            let c = 0.5 * (w[0].0 + w[1].0);
            if let Some(e) = linear_error(&pts, c) {
                if e < best.0 {
                    best = (e, c);
                }
            }
        }
        assert!(best.1.abs() < 0.01, "{best:?}");
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let ladder = discretize_variable(&x, &y);
        assert!((ladder.splits(2)[1] - best.1).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_stop_at_one() {
        let x: Vec<f64> = (0..59).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| (v / 5.0).sin()).collect();
        let ladder = discretize_variable(&x, &y);
        assert_eq!(ladder.chosen_max, 1);
        assert_eq!(ladder.splits_per_granularity, vec![vec![0.0, 58.0]]);
    }

    #[test]
    fn first_bic_uses_two_parameters() {
        let x: Vec<f64> = (0..40).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 0.7).cos()).collect();
        let pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
        let ladder = discretize_variable(&x, &y);
        let expected = 40.0 * interval_fit_mse(&pts).ln() + 2.0 * 40f64.ln();
        assert!((ladder.bic_trace[0] - expected).abs() < 1e-9);
    }

    /// Exhaustive oracle: at every ladder step the added split minimizes
    /// `linear_error` over all admissible midpoints of all intervals.
    #[test]
    fn each_step_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let n = 200 + 40 * trial;
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|&v: &f64| (6.0 * v).sin() + 0.05 * rng.random_range(-1.0..1.0))
                .collect();
            let ladder = discretize_variable(&x, &y);
            let pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
            for g in 1..ladder.splits_per_granularity.len() {
                let prev = ladder.splits(g);
                let next = ladder.splits(g + 1);
                let added = *next.iter().find(|s| !prev.contains(s)).unwrap();
                let mut oracle = f64::INFINITY;
                let mut chosen = None;
                for i in 0..prev.len() - 1 {
                    let last = i == prev.len() - 2;
                    let inside: Vec<(f64, f64)> = pts
                        .iter()
                        .copied()
                        .filter(|p| p.0 >= prev[i] && (p.0 < prev[i + 1] || (last && p.0 <= prev[i + 1])))
                        .collect();
                    let mut xs: Vec<f64> = inside.iter().map(|p| p.0).collect();
                    xs.sort_by(f64::total_cmp);
                    xs.dedup();
                    for w in xs.windows(2) {
                        let c = 0.5 * (w[0] + w[1]);
                        if let Some(e) = linear_error(&inside, c) {
                            oracle = oracle.min(e);
                            if c == added {
                                chosen = Some(e);
                            }
                        }
                    }
                }
                let chosen = chosen.expect("added split is an admissible midpoint");
                assert!(chosen <= oracle * (1.0 + 1e-9) + 1e-12, "{chosen} vs {oracle}");
            }
        }
    }

    #[test]
    fn ladder_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..900).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powi(3) - 2.0 * v + rng.random_range(-0.1..0.1)).collect();
        let ladder = discretize_variable(&x, &y);
        assert!(ladder.chosen_max >= 2);
        for g in 1..ladder.chosen_max {
            let (a, b) = (ladder.splits(g), ladder.splits(g + 1));
            assert_eq!(b.len(), a.len() + 1);
            assert!(a.iter().all(|s| b.contains(s)));
        }
        let top = ladder.splits(ladder.chosen_max);
        for w in top.windows(2) {
            let count = x.iter().filter(|&&v| v >= w[0] && v <= w[1]).count();
            assert!(count >= MIN_INTERVAL);
        }
        let chosen = ladder.bic_trace[ladder.chosen_max - 1];
        assert!(ladder.bic_trace.iter().all(|&b| chosen <= b));
    }

    #[test]
    fn second_bic_in_both_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v: &f64| v.abs() + rng.random_range(-0.05..0.05)).collect();
        let pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
        let n = 300.0f64;
        for mode in [BicError::Pooled, BicError::Summed] {
            let ladder = discretize_variable_with(&x, &y, mode);
            let c = ladder.splits_per_granularity[1][1];
            let left: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 < c).collect();
            let right: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 >= c).collect();
            let err = match mode {
                BicError::Pooled => (interval_fit_se(&left) + interval_fit_se(&right)) / n,
                BicError::Summed => interval_fit_mse(&left) + interval_fit_mse(&right),
            };
            let expected = n * err.ln() + 2.0 * n.ln();
            assert!((ladder.bic_trace[1] - expected).abs() < 1e-8, "{mode:?}");
        }
    }

    #[test]
    fn friedman_inputs_get_two_labels() {
        let d = crate::synthetic::friedman1(960, 1.0, 1);
        let ladders = discretize_dataset(&d);
        let mean = ladders.iter().map(|l| l.chosen_max as f64).sum::<f64>() / ladders.len() as f64;
        assert!((mean - 2.0).abs() <= 0.5, "{mean}");
    }
}
