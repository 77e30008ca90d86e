//! Output discretization by Gaussian kernel density estimation.
//!
//! Class boundaries are placed at the strict local minima of the estimated
//! output density, so each class corresponds to a dense cluster of outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of evenly spaced density evaluation points.
pub const GRID_POINTS: usize = 512;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Class labels derived from the output density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityLabels {
    /// Sorted output values separating consecutive classes.
    pub split_values: Vec<f64>,
    /// Class of each example: number of split values strictly below its output.
    pub labels: Vec<usize>,
    pub c: usize,
}

impl DensityLabels {
    pub fn from_splits(split_values: Vec<f64>, values: &[f64]) -> Self {
        let labels = values
            .iter()
            .map(|&v| split_values.partition_point(|&s| s < v))
            .collect();
        let c = split_values.len() + 1;
        Self {
            split_values,
            labels,
            c,
        }
    }
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

/// One-dimensional Scott rule, `sigma * n^(-1/5)` with the unbiased sample
/// standard deviation.
pub fn scott_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "bandwidth needs at least 2 values, got {}",
            values.len()
        )));
    }
    let sigma = sample_std(values);
    if sigma == 0.0 || !sigma.is_finite() {
        return Err(Error::Degenerate("all output values are equal".into()));
    }
    Ok(sigma * (values.len() as f64).powf(-0.2))
}

/// Gaussian KDE evaluated at each grid point.
pub fn estimate_density(values: &[f64], bandwidth: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty density grid".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let norm = 1.0 / (values.len() as f64 * bandwidth);
    Ok(grid
        .iter()
        .map(|&g| {
            let s: f64 = values
                .iter()
                .map(|&v| {
                    let u = (g - v) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum();
            norm * INV_SQRT_2PI * s
        })
        .collect())
}

/// `GRID_POINTS` evenly spaced points over `[min - 3h, max + 3h]`.
pub fn density_grid(values: &[f64], bandwidth: f64) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let start = lo - 3.0 * bandwidth;
    let step = (hi - lo + 6.0 * bandwidth) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| start + step * i as f64).collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Indices of grid points strictly below both neighbours.
pub fn strict_local_minima(density: &[f64]) -> Vec<usize> {
    (1..density.len().saturating_sub(1))
        .filter(|&i| density[i] < density[i - 1] && density[i] < density[i + 1])
        .collect()
}

/// Labels outputs by the local minima of their density. Falls back to a
/// single split at the median when the density has no interior minimum.
pub fn find_output_splits(values: &[f64]) -> Result<DensityLabels> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "output discretization needs at least 2 values, got {}",
            values.len()
        )));
    }
    let splits = match scott_bandwidth(values) {
        Ok(h) => {
            let grid = density_grid(values, h);
            let density = estimate_density(values, h, &grid)?;
            strict_local_minima(&density)
                .into_iter()
                .map(|i| grid[i])
                .collect()
        }
        Err(Error::Degenerate(_)) => Vec::new(),
        Err(e) => return Err(e),
    };
    let splits = if splits.is_empty() {
        vec![median(values)]
    } else {
        splits
    };
    Ok(DensityLabels::from_splits(splits, values))
}
