//! Training and cross-validation: instance selection, discretization,
//! consequent hyper-parameter tuning and the genetic search, in that order.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, Dataset, FoldSplit};
use crate::discretize::{discretize_dataset_with, BicError, GranularityLadder};
use crate::error::Result;
use crate::evolution::{self, Chromosome, EvolutionConfig, EvolutionReport, Problem};
use crate::fuzzy::FuzzyPartition;
use crate::model::{Metadata, ModelFile};
use crate::rng::derive_seed;
use crate::selection::{select_instances, SelectionResult};
use crate::sgd::{tune_hyperparams, SgdConfig, Tuned};
use crate::tsk::{scaled_problem, DataBase, TskRuleBase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub evolution: EvolutionConfig,
    /// Elastic-Net mixing between the l2 (`alpha`) and l1 penalties.
    pub alpha: f64,
    pub fuzziness: f64,
    pub skip_selection: bool,
    /// Discretize on the whole training set instead of the selected subset.
    pub discretize_on_train: bool,
    pub bic_error: BicError,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            evolution: EvolutionConfig::default(),
            alpha: 0.95,
            fuzziness: 1.0,
            skip_selection: false,
            discretize_on_train: false,
            bic_error: BicError::default(),
        }
    }
}

impl TrainConfig {
    pub fn seed(&self) -> u64 {
        self.evolution.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.evolution.seed = seed;
        self
    }
}

/// Squared-error summary in both the half-factor and the plain form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Errors {
    pub half_mse: f64,
    pub mse: f64,
    /// Examples no rule covered; they were predicted with the fallback.
    pub uncovered: usize,
}

pub fn evaluate(rb: &TskRuleBase, d: &Dataset) -> Errors {
    let mut se = 0.0;
    let mut uncovered = 0;
    for (x, y) in d.x.iter().zip(&d.y) {
        let p = rb.predict_detail(x);
        if !p.covered {
            uncovered += 1;
        }
        se += (p.value - y).powi(2);
    }
    let mse = se / d.n() as f64;
    Errors {
        half_mse: mse / 2.0,
        mse,
        uncovered,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub rulebase: TskRuleBase,
    pub chromosome: Chromosome,
    pub ladders: Vec<GranularityLadder>,
    pub selection: Option<SelectionResult>,
    pub tuned: Tuned,
    pub evolution: EvolutionReport,
    pub train: Errors,
    pub model: ModelFile,
    pub wall_time_s: f64,
}

impl TrainedModel {
    pub fn n_rules(&self) -> usize {
        self.rulebase.n_rules()
    }

    pub fn reduction_pct(&self) -> f64 {
        self.selection.as_ref().map_or(0.0, |s| s.reduction_pct)
    }
}

/// Learning rate and regularization for the consequents, chosen on the
/// single-rule design over the selected examples.
pub fn tune_consequents(selected: &Dataset, alpha: f64, seed: u64) -> Result<Tuned> {
    let partitions = selected
        .inputs
        .iter()
        .map(|v| FuzzyPartition::single(v.min, v.max, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let db = DataBase::new(partitions);
    let (design, targets, _) = scaled_problem(&[vec![None; selected.p()]], &db, &selected.x, &selected.y)?;
    tune_hyperparams(&design.x, &targets, alpha, derive_seed(seed, "tune", &[]))
}

pub fn train(d: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    let start = Instant::now();
    let seed = cfg.seed();
    let selection = if cfg.skip_selection {
        None
    } else {
        Some(select_instances(d)?)
    };
    let selected = match &selection {
        Some(s) => d.subset(&s.selected),
        None => d.clone(),
    };
    let mut ladders = discretize_dataset_with(if cfg.discretize_on_train { d } else { &selected }, cfg.bic_error);
    for (j, l) in ladders.iter_mut().enumerate() {
        l.variable = j;
    }
    let tuned = tune_consequents(&selected, cfg.alpha, seed)?;
    let sgd = SgdConfig {
        lambda: tuned.lambda,
        alpha: cfg.alpha,
        eta0: tuned.eta0,
        seed: derive_seed(seed, "sgd", &[]),
    };
    let problem = Problem {
        ladders: &ladders,
        selected_x: &selected.x,
        selected_y: &selected.y,
        train_x: &d.x,
        train_y: &d.y,
        sgd,
        fuzziness: cfg.fuzziness,
    };
    let (rulebase, report) = evolution::run(&problem, &cfg.evolution)?;
    let train = evaluate(&rulebase, d);
    let names: Vec<String> = d.inputs.iter().map(|v| v.name.clone()).collect();
    let model = ModelFile::new(
        &names,
        &ladders,
        &report.best,
        &rulebase,
        Metadata {
            seed,
            lambda: tuned.lambda,
            alpha: cfg.alpha,
            eta0: tuned.eta0,
            train_mse: train.half_mse,
            fallback: rulebase.fallback,
        },
    );
    Ok(TrainedModel {
        rulebase,
        chromosome: report.best.clone(),
        ladders,
        selection,
        tuned,
        evolution: report,
        train,
        model,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Outcome of one train/test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    pub train_mse_plain: f64,
    pub test_mse_plain: Option<f64>,
    pub test_uncovered: Option<usize>,
    pub n_rules: usize,
    pub granularities: Vec<usize>,
    pub reduction_pct: f64,
    pub evaluations: usize,
    pub generations: usize,
    pub restarts: usize,
    pub lambda: f64,
    pub eta0: f64,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(m: &TrainedModel, test: Option<Errors>) -> Self {
        Self {
            train_mse: m.train.half_mse,
            test_mse: test.map(|e| e.half_mse),
            train_mse_plain: m.train.mse,
            test_mse_plain: test.map(|e| e.mse),
            test_uncovered: test.map(|e| e.uncovered),
            n_rules: m.n_rules(),
            granularities: m.chromosome.granularities.clone(),
            reduction_pct: m.reduction_pct(),
            evaluations: m.evolution.evaluations,
            generations: m.evolution.generations,
            restarts: m.evolution.restarts,
            lambda: m.tuned.lambda,
            eta0: m.tuned.eta0,
            wall_time_s: m.wall_time_s,
        }
    }
}

/// Seed of trial `t`; trial 0 uses the master seed itself.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    if trial == 0 {
        seed
    } else {
        derive_seed(seed, "trial", &[trial as u64])
    }
}

/// Seed used to train on fold `fold` of a split built from `seed`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, "fold", &[fold as u64])
}

/// Trains on every fold but `fold` and tests on `fold`.
pub fn run_fold(d: &Dataset, split: &FoldSplit, fold: usize, cfg: &TrainConfig) -> Result<(TrainedModel, RunReport)> {
    let train_set = d.subset(&split.train_indices(fold));
    let test_set = d.subset(&split.test_indices(fold));
    let cfg = cfg.with_seed(fold_seed(split.seed, fold));
    let model = train(&train_set, &cfg)?;
    let test = evaluate(&model.rulebase, &test_set);
    let report = RunReport::new(&model, Some(test));
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub trial: usize,
    pub fold: usize,
    #[serde(flatten)]
    pub run: RunReport,
}

/// Means over all folds and trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub test_mse: f64,
    pub test_mse_plain: f64,
    pub train_mse: f64,
    pub train_mse_plain: f64,
    pub n_rules: f64,
    pub reduction_pct: f64,
    /// Mean granularity of each input variable.
    pub granularities: Vec<f64>,
    pub evaluations: f64,
}

impl Summary {
    pub fn of(folds: &[FoldReport]) -> Self {
        let n = folds.len() as f64;
        let mean = |f: &dyn Fn(&RunReport) -> f64| folds.iter().map(|r| f(&r.run)).sum::<f64>() / n;
        let p = folds.first().map_or(0, |r| r.run.granularities.len());
        Self {
            test_mse: mean(&|r| r.test_mse.unwrap_or(f64::NAN)),
            test_mse_plain: mean(&|r| r.test_mse_plain.unwrap_or(f64::NAN)),
            train_mse: mean(&|r| r.train_mse),
            train_mse_plain: mean(&|r| r.train_mse_plain),
            n_rules: mean(&|r| r.n_rules as f64),
            reduction_pct: mean(&|r| r.reduction_pct),
            granularities: (0..p).map(|j| mean(&|r| r.granularities[j] as f64)).collect(),
            evaluations: mean(&|r| r.evaluations as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalOutcome {
    pub folds: Vec<FoldReport>,
    pub models: Vec<ModelFile>,
    pub summary: Summary,
}

/// `k`-fold cross-validation repeated `trials` times with independent
/// splits. Runs in parallel on the current rayon pool; results do not
/// depend on the number of threads.
pub fn crossval(d: &Dataset, k: usize, trials: usize, cfg: &TrainConfig) -> Result<CrossvalOutcome> {
    let splits = (0..trials)
        .map(|t| kfold_split(d, k, trial_seed(cfg.seed(), t)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..trials).flat_map(|t| (0..k).map(move |f| (t, f))).collect();
    let results = jobs
        .par_iter()
        .map(|&(t, f)| {
            run_fold(d, &splits[t], f, cfg).map(|(m, run)| (FoldReport { trial: t, fold: f, run }, m.model))
        })
        .collect::<Result<Vec<_>>>()?;
    let (folds, models): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = Summary::of(&folds);
    Ok(CrossvalOutcome { folds, models, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::friedman1;

    fn quick() -> TrainConfig {
        let mut cfg = TrainConfig::default().with_seed(3);
        cfg.evolution.budget = 200;
        cfg.evolution.population = 10;
        cfg
    }

    #[test]
    fn train_produces_consistent_model() {
        let d = friedman1(300, 1.0, 1);
        let m = train(&d, &quick()).unwrap();
        assert!(m.train.half_mse.is_finite());
        assert!((m.train.mse - 2.0 * m.train.half_mse).abs() < 1e-12);
        assert!(m.evolution.evaluations <= 200);
        let rebuilt = m.model.to_rulebase().unwrap();
        for x in d.x.iter().take(50) {
            assert_eq!(rebuilt.predict(x), m.rulebase.predict(x));
        }
        assert_eq!(m.model.metadata.train_mse, m.train.half_mse);
    }

    #[test]
    fn summary_means_are_arithmetic() {
        let d = friedman1(200, 1.0, 2);
        let out = crossval(&d, 2, 1, &quick()).unwrap();
        assert_eq!(out.folds.len(), 2);
        assert_eq!(out.models.len(), 2);
        let mean_rules = out.folds.iter().map(|f| f.run.n_rules as f64).sum::<f64>() / 2.0;
        assert_eq!(out.summary.n_rules, mean_rules);
        let again = crossval(&d, 2, 1, &quick()).unwrap();
        assert_eq!(out.models, again.models);
    }

    #[test]
    fn skipping_selection_keeps_everything() {
        let d = friedman1(150, 1.0, 5);
        let mut cfg = quick();
        cfg.skip_selection = true;
        let m = train(&d, &cfg).unwrap();
        assert!(m.selection.is_none());
        assert_eq!(m.reduction_pct(), 0.0);
    }
}
