//! Elastic-Net linear regression by stochastic gradient descent.
//!
//! Ridge shrinkage is applied multiplicatively through a global scale
//! factor, and the Lasso part uses cumulative-penalty clipping, so each
//! update costs one pass over the columns of one row.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), beta)).collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    /// Overall regularization strength.
    pub lambda: f64,
    /// Share of the penalty given to the ridge (squared) term.
    pub alpha: f64,
    /// Initial learning rate.
    pub eta0: f64,
    pub seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {} must be >= 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta0 {} must be > 0", self.eta0)));
        }
        if self.alpha * self.eta0 * self.lambda >= 1.0 {
            return Err(Error::InvalidArgument(
                "alpha * eta0 * lambda must be below 1 for the ridge shrink factor".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate of update `t` (1-based): `eta0 / (1 + lambda * eta0 * t)`.
    #[inline]
    pub fn learning_rate(&self, t: u64) -> f64 {
        self.eta0 / (1.0 + self.lambda * self.eta0 * t as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdFit {
    pub beta: Vec<f64>,
    /// Best value of `1 - mean squared error` seen at the end of an epoch.
    pub score: f64,
    pub epochs: usize,
}

/// Safety cap on passes over the data.
pub const MAX_EPOCHS: usize = 2000;

/// `1 - mean squared residual`, the epoch-level progress measure.
pub fn fit_score(x: &Matrix, y: &[f64], beta: &[f64]) -> f64 {
    let mse = (0..x.rows)
        .map(|i| {
            let r = dot(x.row(i), beta) - y[i];
            r * r
        })
        .sum::<f64>()
        / x.rows as f64;
    1.0 - mse
}

/// Minimizes squared loss plus `lambda * (alpha * ||b||² + (1 - alpha) * ||b||₁)`
/// by per-example updates, keeping the coefficients of the best epoch.
/// Stops after more than `sqrt(rows / epochs)` epochs without improvement.
pub fn sgd_elastic_net(x: &Matrix, y: &[f64], cfg: &SgdConfig) -> Result<SgdFit> {
    cfg.validate()?;
    if x.rows == 0 || x.cols == 0 {
        return Err(Error::EmptyDesign);
    }
    if y.len() != x.rows {
        return Err(Error::InvalidArgument(format!(
            "{} targets for {} rows",
            y.len(),
            x.rows
        )));
    }
    let cols = x.cols;
    let mut w = vec![0.0; cols];
    let mut q = vec![0.0; cols];
    let mut s = 1.0f64;
    let mut u = 0.0f64;
    let mut t = 0u64;
    let mut best = SgdFit {
        beta: vec![0.0; cols],
        score: f64::NEG_INFINITY,
        epochs: 0,
    };
    let mut it_wi = 0usize;
    let mut order: Vec<usize> = (0..x.rows).collect();
    let mut shuffle = rng::substream(cfg.seed, "sgd");
    let mut scaled = vec![0.0; cols];

    for epoch in 1..=MAX_EPOCHS {
        order.shuffle(&mut shuffle);
        for &i in &order {
            let row = x.row(i);
            t += 1;
            let eta = cfg.learning_rate(t);
            let y_hat = dot(row, &w) * s;
            if !y_hat.is_finite() {
                return Err(Error::Divergence { eta0: cfg.eta0 });
            }
            s *= 1.0 - cfg.alpha * eta * cfg.lambda;
            u += (1.0 - cfg.alpha) * eta * cfg.lambda;
            let step = eta * (y_hat - y[i]) / s;
            for j in 0..cols {
                let half = w[j] - step * row[j];
                let next = if s * half > 0.0 {
                    (half - (u + q[j]) / s).max(0.0)
                } else if s * half < 0.0 {
                    (half + (u - q[j]) / s).min(0.0)
                } else {
                    half
                };
                q[j] += s * (next - half);
                w[j] = next;
            }
            if s < 1e-9 {
                for wj in &mut w {
                    *wj *= s;
                }
                s = 1.0;
            }
        }
        for (dst, &wj) in scaled.iter_mut().zip(&w) {
            *dst = wj * s;
        }
        if scaled.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { eta0: cfg.eta0 });
        }
        let score = fit_score(x, y, &scaled);
        if !score.is_finite() {
            return Err(Error::Divergence { eta0: cfg.eta0 });
        }
        if score > best.score {
            best.beta.copy_from_slice(&scaled);
            best.score = score;
            it_wi = 0;
        } else {
            it_wi += 1;
        }
        best.epochs = epoch;
        if it_wi as f64 > (x.rows as f64 / epoch as f64).sqrt() {
            break;
        }
    }
    Ok(best)
}

/// Candidate regularization strengths, strongest first.
pub const LAMBDA_GRID: [f64; 11] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

/// Starting learning rate of the halving search.
pub const ETA0_START: f64 = 0.1;

/// Rows used by the hyper-parameter search.
pub const TUNING_ROWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuned {
    pub lambda: f64,
    pub eta0: f64,
    pub score: f64,
}

struct Holdout {
    fit_x: Matrix,
    fit_y: Vec<f64>,
    val_x: Matrix,
    val_y: Vec<f64>,
}

impl Holdout {
    fn score(&self, lambda: f64, alpha: f64, eta0: f64, seed: u64) -> f64 {
        let cfg = SgdConfig {
            lambda,
            alpha,
            eta0,
            seed,
        };
        match sgd_elastic_net(&self.fit_x, &self.fit_y, &cfg) {
            Ok(fit) => fit_score(&self.val_x, &self.val_y, &fit.beta),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Grid search for `lambda` followed by halving search for `eta0`.
///
/// Up to [`TUNING_ROWS`] shuffled rows are split 70/30 into a fitting part
/// and a validation part; candidates are ranked by `1 - MSE` on the
/// validation part. Ties keep the stronger regularization and the larger
/// learning rate.
pub fn tune_hyperparams(x: &Matrix, y: &[f64], alpha: f64, seed: u64) -> Result<Tuned> {
    if x.rows == 0 {
        return Err(Error::EmptyDesign);
    }
    let mut order: Vec<usize> = (0..x.rows).collect();
    order.shuffle(&mut rng::substream(seed, "tune"));
    order.truncate(TUNING_ROWS);
    let (fit_idx, val_idx) = if order.len() >= 4 {
        let cut = (order.len() * 7).div_ceil(10);
        (order[..cut].to_vec(), order[cut..].to_vec())
    } else {
        (order.clone(), order.clone())
    };
    let pick = |idx: &[usize]| (x.select_rows(idx), idx.iter().map(|&i| y[i]).collect::<Vec<_>>());
    let (fit_x, fit_y) = pick(&fit_idx);
    let (val_x, val_y) = pick(&val_idx);
    let holdout = Holdout {
        fit_x,
        fit_y,
        val_x,
        val_y,
    };
    let sgd_seed = rng::derive_seed(seed, "tune-sgd", &[]);

    let mut eta0 = ETA0_START;
    let (mut lambda, mut best) = (LAMBDA_GRID[0], f64::NEG_INFINITY);
    // Shrink the starting rate until at least one grid point converges.
    for _ in 0..30 {
        for &l in &LAMBDA_GRID {
            let score = holdout.score(l, alpha, eta0, sgd_seed);
            if score > best {
                lambda = l;
                best = score;
            }
        }
        if best.is_finite() {
            break;
        }
        eta0 /= 2.0;
    }
    if !best.is_finite() {
        return Err(Error::Divergence { eta0 });
    }
    for _ in 0..30 {
        let candidate = eta0 / 2.0;
        let score = holdout.score(lambda, alpha, candidate, sgd_seed);
        if score > best {
            eta0 = candidate;
            best = score;
        } else {
            break;
        }
    }
    Ok(Tuned {
        lambda,
        eta0,
        score: best,
    })
}
