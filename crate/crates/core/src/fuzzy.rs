//! Strong trapezoidal fuzzy partitions built from split points, and the
//! lateral displacement of split points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bound on the magnitude of a lateral displacement (open interval).
pub const MAX_DISPLACEMENT: f64 = 0.5;

/// A trapezoidal label: support `[a, d]`, kernel `[b, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trapezoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// A strong fuzzy partition of `[splits[0], splits[g]]` into `g` labels.
///
/// Label `j` covers the crisp interval `[splits[j], splits[j + 1]]`. Around
/// every inner split `s` the two neighbouring labels share a linear flank of
/// half-width `w = F * min(left gap, right gap) / 2`, so memberships always
/// sum to one. With `F = 0` the labels are crisp, half-open on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyPartition {
    splits: Vec<f64>,
    fuzziness: f64,
    /// Flank half-width at each split; zero at the domain ends.
    widths: Vec<f64>,
}

impl FuzzyPartition {
    pub fn new(splits: &[f64], fuzziness: f64) -> Result<Self> {
        if splits.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a partition needs at least 2 split points, got {}",
                splits.len()
            )));
        }
        if !(0.0..=1.0).contains(&fuzziness) {
            return Err(Error::InvalidArgument(format!(
                "fuzziness {fuzziness} outside [0, 1]"
            )));
        }
        if splits.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("non-finite split point".into()));
        }
        if splits.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "split points must be strictly increasing: {splits:?}"
            )));
        }
        let g = splits.len() - 1;
        let mut widths = vec![0.0; splits.len()];
        for j in 1..g {
            let gap = (splits[j] - splits[j - 1]).min(splits[j + 1] - splits[j]);
            widths[j] = fuzziness * gap / 2.0;
        }
        Ok(Self {
            splits: splits.to_vec(),
            fuzziness,
            widths,
        })
    }

    /// A single label covering `[lo, hi]` with membership one.
    pub fn single(lo: f64, hi: f64, fuzziness: f64) -> Result<Self> {
        let hi = if hi > lo { hi } else { lo + 1.0 };
        Self::new(&[lo, hi], fuzziness)
    }

    pub fn granularity(&self) -> usize {
        self.splits.len() - 1
    }

    pub fn splits(&self) -> &[f64] {
        &self.splits
    }

    pub fn fuzziness(&self) -> f64 {
        self.fuzziness
    }

    pub fn label(&self, j: usize) -> Trapezoid {
        let (left, right) = (self.splits[j], self.splits[j + 1]);
        let (wl, wr) = (self.widths[j], self.widths[j + 1]);
        Trapezoid {
            a: left - wl,
            b: left + wl,
            c: right - wr,
            d: right + wr,
        }
    }

    pub fn labels(&self) -> Vec<Trapezoid> {
        (0..self.granularity()).map(|j| self.label(j)).collect()
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.splits[0], self.splits[self.granularity()])
    }

    /// Membership of `x` in label `j`; panics if `j` is out of range.
    #[inline]
    pub fn membership_unchecked(&self, j: usize, x: f64) -> f64 {
        let g = self.granularity();
        if g == 1 {
            return 1.0;
        }
        let x = self.clamp(x);
        let (left, right) = (self.splits[j], self.splits[j + 1]);
        let (wl, wr) = (self.widths[j], self.widths[j + 1]);
        if x < left - wl {
            return 0.0;
        }
        if j + 1 < g && x >= right + wr {
            return 0.0;
        }
        if wl > 0.0 && x < left + wl {
            return (x - (left - wl)) / (2.0 * wl);
        }
        if wr > 0.0 && x > right - wr {
            return (right + wr - x) / (2.0 * wr);
        }
        1.0
    }

    pub fn membership(&self, j: usize, x: f64) -> Result<f64> {
        if j >= self.granularity() {
            return Err(Error::InvalidArgument(format!(
                "label {j} out of range for granularity {}",
                self.granularity()
            )));
        }
        Ok(self.membership_unchecked(j, x))
    }

    /// Label with maximal membership at `x`, ties to the lower index.
    pub fn best_label(&self, x: f64) -> usize {
        let mut best = (0, self.membership_unchecked(0, x));
        for j in 1..self.granularity() {
            let m = self.membership_unchecked(j, x);
            if m > best.1 {
                best = (j, m);
            }
        }
        best.0
    }
}

/// Builds the partition of `splits` with the given fuzziness.
pub fn build_partition(splits: &[f64], fuzziness: f64) -> Result<FuzzyPartition> {
    FuzzyPartition::new(splits, fuzziness)
}

/// Outcome of displacing a split list.
#[derive(Debug, Clone, PartialEq)]
pub struct Displaced {
    pub splits: Vec<f64>,
    /// Inner split indices that had to be clamped to keep strict order.
    pub clamped: Vec<usize>,
}

/// Moves each inner split by a fraction of the gap to its original right
/// neighbour (positive `alpha`) or left neighbour (negative `alpha`).
/// Domain endpoints never move.
pub fn apply_displacement(splits: &[f64], alphas: &[f64]) -> Result<Displaced> {
    let inner = splits.len().saturating_sub(2);
    if alphas.len() != inner {
        return Err(Error::InvalidArgument(format!(
            "{} displacements for {inner} inner split points",
            alphas.len()
        )));
    }
    let mut out = splits.to_vec();
    for (k, &alpha) in alphas.iter().enumerate() {
        let j = k + 1;
        out[j] = if alpha >= 0.0 {
            splits[j] + alpha * (splits[j + 1] - splits[j])
        } else {
            splits[j] + alpha * (splits[j] - splits[j - 1])
        };
    }
    let mut clamped = Vec::new();
    for j in 1..=inner {
        if !(out[j - 1] < out[j] && out[j] < out[j + 1]) {
            out[j] = 0.5 * (out[j - 1] + out[j + 1]) - 1e-12;
            clamped.push(j);
        }
    }
    Ok(Displaced {
        splits: out,
        clamped,
    })
}
