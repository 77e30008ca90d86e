//! Instance selection for regression.
//!
//! Outputs are first turned into classes by [`find_output_splits`]; the
//! class-conditional nearest-neighbour graphs then rank examples, a greedy
//! pass accumulates them in rank order while tracking the leave-one-out 1NN
//! error, and Thin-out keeps only points near the between-class boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::density::{find_output_splits, DensityLabels};
use crate::error::{Error, Result};

/// Inputs min-max scaled to `[0, 1]` per variable, row-major.
#[derive(Debug, Clone)]
pub struct NormalizedInputs {
    values: Vec<f64>,
    p: usize,
}

impl NormalizedInputs {
    pub fn new(d: &Dataset) -> Self {
        let p = d.p();
        let mut lo = vec![f64::INFINITY; p];
        let mut hi = vec![f64::NEG_INFINITY; p];
        for row in &d.x {
            for j in 0..p {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
        let mut values = Vec::with_capacity(d.n() * p);
        for row in &d.x {
            for j in 0..p {
                let range = hi[j] - lo[j];
                values.push(if range > 0.0 { (row[j] - lo[j]) / range } else { 0.0 });
            }
        }
        Self { values, p }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    /// Squared Euclidean distance between examples `a` and `b`.
    #[inline]
    pub fn dist2(&self, a: usize, b: usize) -> f64 {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .map(|(u, v)| (u - v) * (u - v))
            .sum()
    }
}

/// Nearest member of `candidates` to `e`, excluding `e` itself; ties go to
/// the lowest example index.
fn nearest(
    inputs: &NormalizedInputs,
    e: usize,
    candidates: impl IntoIterator<Item = usize>,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for s in candidates {
        if s == e {
            continue;
        }
        let d = inputs.dist2(e, s);
        match best {
            Some((bd, bi)) if bd < d || (bd == d && bi < s) => {}
            _ => best = Some((d, s)),
        }
    }
    best.map(|b| b.1)
}

fn loo_error(inputs: &NormalizedInputs, y: &[f64], reference: &[usize], evaluate_on: &[usize]) -> Result<f64> {
    let sq: Vec<f64> = evaluate_on
        .par_iter()
        .map(|&e| {
            nearest(inputs, e, reference.iter().copied())
                .map(|nn| (y[nn] - y[e]) * (y[nn] - y[e]))
                .ok_or(Error::InsufficientReference)
        })
        .collect::<Result<_>>()?;
    Ok(sq.iter().sum::<f64>() / evaluate_on.len() as f64)
}

/// Mean squared error of 1NN regression on `evaluate_on` using `reference`
/// as the prototype set; an example never serves as its own neighbour.
pub fn loo_1nn_mse(reference: &[usize], evaluate_on: &[usize], d: &Dataset) -> Result<f64> {
    if evaluate_on.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    loo_error(&NormalizedInputs::new(d), &d.y, reference, evaluate_on)
}

/// Within-class and between-class nearest-neighbour graphs over a subset.
/// Vectors are indexed by example index of the full dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CcnnGraphs {
    pub gwc_edges: Vec<Option<usize>>,
    pub gbc_edges: Vec<Option<usize>>,
    pub gwc_indegree: Vec<usize>,
    pub gbc_indegree: Vec<usize>,
    pub total_gwc: usize,
    pub total_gbc: usize,
}

fn ccnn_graphs(inputs: &NormalizedInputs, labels: &[usize], subset: &[usize]) -> CcnnGraphs {
    let n = labels.len();
    let edges: Vec<(usize, Option<usize>, Option<usize>)> = subset
        .par_iter()
        .map(|&a| {
            let same = nearest(inputs, a, subset.iter().copied().filter(|&s| labels[s] == labels[a]));
            let other = nearest(inputs, a, subset.iter().copied().filter(|&s| labels[s] != labels[a]));
            (a, same, other)
        })
        .collect();
    let mut g = CcnnGraphs {
        gwc_edges: vec![None; n],
        gbc_edges: vec![None; n],
        gwc_indegree: vec![0; n],
        gbc_indegree: vec![0; n],
        total_gwc: 0,
        total_gbc: 0,
    };
    for (a, same, other) in edges {
        g.gwc_edges[a] = same;
        g.gbc_edges[a] = other;
        if let Some(t) = same {
            g.gwc_indegree[t] += 1;
            g.total_gwc += 1;
        }
        if let Some(t) = other {
            g.gbc_indegree[t] += 1;
            g.total_gbc += 1;
        }
    }
    g
}

pub fn build_ccnn_graphs(d: &Dataset, labels: &DensityLabels, subset: &[usize]) -> CcnnGraphs {
    ccnn_graphs(&NormalizedInputs::new(d), &labels.labels, subset)
}

/// K-divergence score of example `i` from its normalized in-degrees.
pub fn score(i: usize, g: &CcnnGraphs) -> f64 {
    let frac = |deg: usize, total: usize| if total == 0 { 0.0 } else { deg as f64 / total as f64 };
    let pw = frac(g.gwc_indegree[i], g.total_gwc);
    let pb = frac(g.gbc_indegree[i], g.total_gbc);
    let m = 0.5 * (pw + pb);
    if m == 0.0 {
        return 0.0;
    }
    let term = |p: f64| if p == 0.0 { 0.0 } else { p * (p / m).ln() };
    term(pw) - term(pb)
}

/// Incremental nearest-neighbour bookkeeping for a growing reference set,
/// evaluated over every example of the dataset.
struct GrowingReference<'a> {
    inputs: &'a NormalizedInputs,
    y: &'a [f64],
    best: Vec<Option<(f64, usize)>>,
}

impl<'a> GrowingReference<'a> {
    fn new(inputs: &'a NormalizedInputs, y: &'a [f64]) -> Self {
        Self {
            inputs,
            y,
            best: vec![None; y.len()],
        }
    }

    fn add(&mut self, s: usize) {
        let inputs = self.inputs;
        self.best.par_iter_mut().enumerate().for_each(|(e, slot)| {
            if e == s {
                return;
            }
            let d = inputs.dist2(e, s);
            match *slot {
                Some((bd, bi)) if bd < d || (bd == d && bi < s) => {}
                _ => *slot = Some((d, s)),
            }
        });
    }

    fn error(&self) -> f64 {
        let total: f64 = self
            .best
            .iter()
            .enumerate()
            .map(|(e, b)| {
                let nn = b.expect("reference set holds at least two examples").1;
                (self.y[nn] - self.y[e]) * (self.y[nn] - self.y[e])
            })
            .sum();
        total / self.y.len() as f64
    }
}

/// Result of the greedy class-conditional accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassConditional {
    pub selected: Vec<usize>,
    pub k0: usize,
    /// Leave-one-out 1NN error of the full set.
    pub full_error: f64,
    pub selected_error: f64,
}

/// Size of the initial core: at least one example per class, and at least
/// as many as the error-to-range ratio suggests, clamped to `n`.
pub fn initial_core_size(c: usize, full_error: f64, n: usize, y_range: f64) -> usize {
    let by_error = if y_range > 0.0 {
        (full_error * n as f64 / y_range).ceil()
    } else {
        0.0
    };
    let by_error = if by_error.is_finite() { by_error as usize } else { n };
    c.max(by_error).min(n)
}

fn scored_order(inputs: &NormalizedInputs, labels: &DensityLabels) -> Vec<usize> {
    let all: Vec<usize> = (0..labels.labels.len()).collect();
    let graphs = ccnn_graphs(inputs, &labels.labels, &all);
    let scores: Vec<f64> = all.iter().map(|&i| score(i, &graphs)).collect();
    let mut order = all;
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

fn class_conditional(inputs: &NormalizedInputs, y: &[f64], labels: &DensityLabels) -> Result<ClassConditional> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidArgument("instance selection needs at least 2 examples".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let full_error = loo_error(inputs, y, &all, &all)?;
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let k0 = initial_core_size(labels.c, full_error, n, hi - lo).max(2);
    let order = scored_order(inputs, labels);

    let mut reference = GrowingReference::new(inputs, y);
    for &e in &order[..k0] {
        reference.add(e);
    }
    let mut size = k0;
    let mut best_size = k0;
    let mut best_error = reference.error();
    let mut it_wi = 0usize;
    while size < n && it_wi as f64 <= (n as f64 / size as f64).sqrt() {
        reference.add(order[size]);
        size += 1;
        let err = reference.error();
        if err < best_error {
            it_wi = 0;
            best_size = size;
            best_error = err;
        } else {
            it_wi += 1;
        }
    }
    let mut selected = order[..best_size].to_vec();
    selected.sort_unstable();
    Ok(ClassConditional {
        selected,
        k0,
        full_error,
        selected_error: best_error,
    })
}

/// Greedy accumulation of examples in decreasing score order, returning the
/// prefix with the lowest 1NN error over the whole set.
pub fn class_conditional_select(d: &Dataset, labels: &DensityLabels) -> Result<ClassConditional> {
    class_conditional(&NormalizedInputs::new(d), &d.y, labels)
}

fn thin(inputs: &NormalizedInputs, y: &[f64], labels: &[usize], s: &[usize]) -> Result<Vec<usize>> {
    let n = y.len();
    let all: Vec<usize> = (0..n).collect();
    let positive_bc = |subset: &[usize]| ccnn_graphs(inputs, labels, subset).gbc_indegree;
    let minus = |a: &[usize], b: &[usize]| -> Vec<usize> {
        let mut member = vec![false; n];
        for &i in b {
            member[i] = true;
        }
        a.iter().copied().filter(|&i| !member[i]).collect()
    };

    let deg_s = positive_bc(s);
    let mut kept: Vec<usize> = s.iter().copied().filter(|&i| deg_s[i] > 0).collect();
    if kept.is_empty() {
        return Ok(s.to_vec());
    }
    let mut prev_deg = deg_s;
    let mut rest = minus(s, &kept);
    let mut kept_error = loo_error(inputs, y, &kept, &all)?;
    loop {
        let rest_deg = positive_bc(&rest);
        let candidates: Vec<usize> = rest
            .iter()
            .copied()
            .filter(|&i| rest_deg[i] > 0 && prev_deg[i] > 0)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let mut merged = kept.clone();
        merged.extend(&candidates);
        merged.sort_unstable();
        let merged_error = loo_error(inputs, y, &merged, &all)?;
        if merged_error >= kept_error {
            break;
        }
        kept = merged;
        kept_error = merged_error;
        prev_deg = rest_deg;
        rest = minus(s, &kept);
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Keeps the members of `s` near the between-class boundary, growing the
/// kept set while the 1NN error over the whole dataset improves.
pub fn thin_out(d: &Dataset, labels: &DensityLabels, s: &[usize]) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("thin-out of an empty set".into()));
    }
    thin(&NormalizedInputs::new(d), &d.y, &labels.labels, s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<usize>,
    pub reduction_pct: f64,
    pub error_increase: f64,
    pub k0: usize,
    pub c: usize,
}

/// Output discretization, class-conditional selection and Thin-out over
/// the whole of `d`. Deterministic: the same dataset always yields the same
/// subset.
pub fn select_instances(d: &Dataset) -> Result<SelectionResult> {
    let n = d.n();
    if n < 2 {
        return Err(Error::InvalidArgument("instance selection needs at least 2 examples".into()));
    }
    let inputs = NormalizedInputs::new(d);
    let labels = find_output_splits(&d.y)?;
    let cc = class_conditional(&inputs, &d.y, &labels)?;
    let selected = if cc.selected.len() == n {
        cc.selected
    } else {
        thin(&inputs, &d.y, &labels.labels, &cc.selected)?
    };
    let all: Vec<usize> = (0..n).collect();
    let selected_error = loo_error(&inputs, &d.y, &selected, &all)?;
    let error_increase = if cc.full_error > 0.0 {
        selected_error / cc.full_error
    } else if selected_error == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    Ok(SelectionResult {
        reduction_pct: (1.0 - selected.len() as f64 / n as f64) * 100.0,
        selected,
        error_increase,
        k0: cc.k0,
        c: labels.c,
    })
}
