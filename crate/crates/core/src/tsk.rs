//! First-order TSK rule bases over linguistic partitions: inference, rule
//! antecedents from examples, the joint consequent design matrix and the
//! consequent fit.

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::FuzzyPartition;
use crate::sgd::{sgd_elastic_net, Matrix, SgdConfig};

/// One partition per input variable. Variables of granularity 1 take no
/// part in rule antecedents but still appear in consequents.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBase {
    pub partitions: Vec<FuzzyPartition>,
}

impl DataBase {
    pub fn new(partitions: Vec<FuzzyPartition>) -> Self {
        Self { partitions }
    }

    pub fn p(&self) -> usize {
        self.partitions.len()
    }

    pub fn granularities(&self) -> Vec<usize> {
        self.partitions.iter().map(FuzzyPartition::granularity).collect()
    }

    /// Indices of variables used in antecedents.
    pub fn antecedent_variables(&self) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| self.partitions[j].granularity() > 1)
            .collect()
    }
}

/// Label per variable, `None` for variables outside the antecedent.
pub type Antecedent = Vec<Option<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TskRule {
    pub antecedent: Antecedent,
    /// Intercept first, then one coefficient per input variable.
    pub beta: Vec<f64>,
}

impl TskRule {
    pub fn output(&self, x: &[f64]) -> f64 {
        self.beta[0] + self.beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

pub fn matching_degree(antecedent: &[Option<usize>], db: &DataBase, x: &[f64]) -> f64 {
    antecedent
        .iter()
        .enumerate()
        .filter_map(|(j, label)| label.map(|l| db.partitions[j].membership_unchecked(l, x[j])))
        .fold(1.0, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TskRuleBase {
    pub database: DataBase,
    pub rules: Vec<TskRule>,
    /// Returned for inputs no rule covers.
    pub fallback: f64,
}

/// A prediction and whether any rule fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub covered: bool,
}

impl TskRuleBase {
    /// Weighted average of rule outputs by matching degree.
    pub fn predict_detail(&self, x: &[f64]) -> Prediction {
        let (mut num, mut den) = (0.0, 0.0);
        for rule in &self.rules {
            let h = matching_degree(&rule.antecedent, &self.database, x);
            if h > 0.0 {
                num += h * rule.output(x);
                den += h;
            }
        }
        if den > 0.0 {
            Prediction {
                value: num / den,
                covered: true,
            }
        } else {
            Prediction {
                value: self.fallback,
                covered: false,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_detail(x).value
    }

    pub fn n_rules(&self) -> usize {
        self.rules.len()
    }
}

/// One antecedent per distinct combination of maximal labels among the
/// examples, in order of first appearance.
pub fn wang_mendel_antecedents(db: &DataBase, xs: &[Vec<f64>]) -> Vec<Antecedent> {
    let vars = db.antecedent_variables();
    let mut seen: IndexSet<Antecedent> = IndexSet::new();
    for x in xs {
        let mut a = vec![None; db.p()];
        for &j in &vars {
            a[j] = Some(db.partitions[j].best_label(x[j]));
        }
        seen.insert(a);
    }
    if seen.is_empty() {
        seen.insert(vec![None; db.p()]);
    }
    seen.into_iter().collect()
}

/// Min-max scaling of consequent inputs and standardization of the output,
/// used while fitting so that one regularization grid suits every dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsequentScaling {
    pub x_min: Vec<f64>,
    pub x_range: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

impl ConsequentScaling {
    pub fn identity(p: usize) -> Self {
        Self {
            x_min: vec![0.0; p],
            x_range: vec![1.0; p],
            y_mean: 0.0,
            y_scale: 1.0,
        }
    }

    pub fn fit(xs: &[Vec<f64>], ys: &[f64]) -> Self {
        let p = xs.first().map_or(0, Vec::len);
        let mut x_min = vec![f64::INFINITY; p];
        let mut x_max = vec![f64::NEG_INFINITY; p];
        for x in xs {
            for j in 0..p {
                x_min[j] = x_min[j].min(x[j]);
                x_max[j] = x_max[j].max(x[j]);
            }
        }
        let x_range = x_min.iter().zip(&x_max).map(|(lo, hi)| hi - lo).collect();
        let n = ys.len() as f64;
        let y_mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self {
            x_min,
            x_range,
            y_mean,
            y_scale,
        }
    }

    #[inline]
    fn x(&self, j: usize, v: f64) -> f64 {
        if self.x_range[j] > 0.0 {
            (v - self.x_min[j]) / self.x_range[j]
        } else {
            0.0
        }
    }

    fn y(&self, v: f64) -> f64 {
        (v - self.y_mean) / self.y_scale
    }

    /// Converts one rule's consequent from scaled to raw units.
    fn unscale(&self, beta: &[f64]) -> Vec<f64> {
        let mut raw = vec![0.0; beta.len()];
        let mut intercept = self.y_mean + self.y_scale * beta[0];
        for j in 0..beta.len() - 1 {
            if self.x_range[j] > 0.0 {
                let b = self.y_scale * beta[j + 1] / self.x_range[j];
                raw[j + 1] = b;
                intercept -= b * self.x_min[j];
            }
        }
        raw[0] = intercept;
        raw
    }
}

/// The joint consequent regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    /// `rows x m(p+1)`; row `i` is `(z_k, z_k x_1, …, z_k x_p)` for each rule `k`.
    pub x: Matrix,
    /// Normalized firing strengths, `rows x m`.
    pub z: Matrix,
    /// Example index of each row.
    pub kept: Vec<usize>,
    /// Examples no rule covers.
    pub dropped: Vec<usize>,
}

fn design_matrix(
    antecedents: &[Antecedent],
    db: &DataBase,
    xs: &[Vec<f64>],
    scaling: &ConsequentScaling,
) -> Result<DesignMatrix> {
    let m = antecedents.len();
    let p = db.p();
    let width = p + 1;
    let mut x_rows = Vec::with_capacity(xs.len() * m * width);
    let mut z_rows = Vec::with_capacity(xs.len() * m);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut h = vec![0.0; m];
    for (i, x) in xs.iter().enumerate() {
        for (k, a) in antecedents.iter().enumerate() {
            h[k] = matching_degree(a, db, x);
        }
        let total: f64 = h.iter().sum();
        if total <= 0.0 {
            dropped.push(i);
            continue;
        }
        kept.push(i);
        for &hk in &h {
            let z = hk / total;
            z_rows.push(z);
            x_rows.push(z);
            for (j, &v) in x.iter().enumerate() {
                x_rows.push(scaling.x(j, v) * z);
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDesign);
    }
    Ok(DesignMatrix {
        x: Matrix {
            rows: kept.len(),
            cols: m * width,
            data: x_rows,
        },
        z: Matrix {
            rows: kept.len(),
            cols: m,
            data: z_rows,
        },
        kept,
        dropped,
    })
}

/// Builds the design matrix on raw inputs. Uncovered examples are dropped
/// and listed in [`DesignMatrix::dropped`].
pub fn build_design_matrix(antecedents: &[Antecedent], db: &DataBase, xs: &[Vec<f64>]) -> Result<DesignMatrix> {
    design_matrix(antecedents, db, xs, &ConsequentScaling::identity(db.p()))
}

/// Design matrix and target vector on scaled units, as used by
/// [`fit_consequents`].
pub fn scaled_problem(
    antecedents: &[Antecedent],
    db: &DataBase,
    xs: &[Vec<f64>],
    ys: &[f64],
) -> Result<(DesignMatrix, Vec<f64>, ConsequentScaling)> {
    let scaling = ConsequentScaling::fit(xs, ys);
    let design = design_matrix(antecedents, db, xs, &scaling)?;
    let targets = design.kept.iter().map(|&i| scaling.y(ys[i])).collect();
    Ok((design, targets, scaling))
}

/// Fits all consequents jointly and returns the rule base.
pub fn fit_consequents(
    db: &DataBase,
    antecedents: Vec<Antecedent>,
    xs: &[Vec<f64>],
    ys: &[f64],
    cfg: &SgdConfig,
) -> Result<TskRuleBase> {
    let (design, targets, scaling) = scaled_problem(&antecedents, db, xs, ys)?;
    let fit = sgd_elastic_net(&design.x, &targets, cfg)?;
    let width = db.p() + 1;
    let rules = antecedents
        .into_iter()
        .enumerate()
        .map(|(k, antecedent)| TskRule {
            antecedent,
            beta: scaling.unscale(&fit.beta[k * width..(k + 1) * width]),
        })
        .collect();
    Ok(TskRuleBase {
        database: db.clone(),
        rules,
        fallback: scaling.y_mean,
    })
}

/// Antecedents from the examples, consequents by Elastic-Net SGD.
pub fn build_rulebase(db: &DataBase, xs: &[Vec<f64>], ys: &[f64], cfg: &SgdConfig) -> Result<TskRuleBase> {
    if xs.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let antecedents = wang_mendel_antecedents(db, xs);
    fit_consequents(db, antecedents, xs, ys, cfg)
}
