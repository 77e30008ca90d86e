//! Synthetic regression problems.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::rng;

/// Friedman #1: five uniform inputs on `[0, 1]` and
/// `y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + noise`.
pub fn friedman1(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut r = rng::substream(seed, "friedman1");
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let v: Vec<f64> = (0..5).map(|_| r.random::<f64>()).collect();
        let clean = 10.0 * (std::f64::consts::PI * v[0] * v[1]).sin()
            + 20.0 * (v[2] - 0.5).powi(2)
            + 10.0 * v[3]
            + 5.0 * v[4];
        y.push(clean + noise * r.sample::<f64, _>(StandardNormal));
        x.push(v);
    }
    Dataset::from_examples("friedman1", &["x1", "x2", "x3", "x4", "x5"], "y", x, y)
        .expect("generated data is finite")
}
