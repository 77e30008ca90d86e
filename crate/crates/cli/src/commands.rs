use std::fs;
use std::path::Path;

use fruler_core::discretize::{discretize_dataset_with, BicError};
use fruler_core::evolution::EvolutionConfig;
use fruler_core::pipeline::{self, RunReport, TrainConfig};
use fruler_core::{kfold_split, load_dataset, select_instances, Dataset, Error, Format, ModelFile, Result};
use serde::Serialize;

use crate::{CrossvalArgs, DataArgs, DiscretizeArgs, InspectArgs, LearnArgs, PredictArgs, SelectArgs, TrainArgs};

/// Crossover is always applied to every pair.
const CROSSOVER_PROBABILITY: f64 = 1.0;

fn load(a: &DataArgs) -> Result<Dataset> {
    let format = a.format.unwrap_or_else(|| Format::from_path(&a.data));
    load_dataset(&a.data, format)
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn select(a: SelectArgs) -> Result<()> {
    let d = load(&a.data)?;
    write_json(&select_instances(&d)?, a.output.as_deref())
}

#[derive(Serialize)]
struct LadderReport {
    variable: String,
    splits_per_granularity: Vec<Vec<f64>>,
    chosen_max: usize,
    bic_trace: Vec<f64>,
}

pub fn discretize(a: DiscretizeArgs) -> Result<()> {
    let d = load(&a.data)?;
    let source = if a.selected {
        d.subset(&select_instances(&d)?.selected)
    } else {
        d.clone()
    };
    let report: Vec<LadderReport> = discretize_dataset_with(&source, a.bic_error)
        .into_iter()
        .map(|l| LadderReport {
            variable: d.inputs[l.variable].name.clone(),
            splits_per_granularity: l.splits_per_granularity,
            chosen_max: l.chosen_max,
            bic_trace: l.bic_trace,
        })
        .collect();
    write_json(&report, a.output.as_deref())
}

/// Effective run parameters, echoed into every report.
#[derive(Serialize)]
struct Echo {
    seed: u64,
    budget: usize,
    population: usize,
    p_mut: f64,
    p_cross: f64,
    n_ls: usize,
    alpha: f64,
    fuzziness: f64,
    skip_selection: bool,
    discretize_on_train: bool,
    bic_error: BicError,
    #[serde(skip_serializing_if = "Option::is_none")]
    folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jobs: Option<usize>,
}

impl Echo {
    fn new(cfg: &TrainConfig) -> Self {
        Self {
            seed: cfg.evolution.seed,
            budget: cfg.evolution.budget,
            population: cfg.evolution.population,
            p_mut: cfg.evolution.p_mut,
            p_cross: CROSSOVER_PROBABILITY,
            n_ls: cfg.evolution.n_ls,
            alpha: cfg.alpha,
            fuzziness: cfg.fuzziness,
            skip_selection: cfg.skip_selection,
            discretize_on_train: cfg.discretize_on_train,
            bic_error: cfg.bic_error,
            folds: None,
            fold: None,
            trials: None,
            jobs: None,
        }
    }
}

fn train_config(l: &LearnArgs) -> Result<TrainConfig> {
    if !(0.0..=1.0).contains(&l.alpha) {
        return Err(Error::InvalidArgument(format!("alpha {} outside [0, 1]", l.alpha)));
    }
    if !(0.0..=1.0).contains(&l.fuzziness) {
        return Err(Error::InvalidArgument(format!("fuzziness {} outside [0, 1]", l.fuzziness)));
    }
    Ok(TrainConfig {
        evolution: EvolutionConfig {
            population: l.population,
            budget: l.budget,
            p_mut: l.pmut,
            n_ls: l.nls,
            seed: l.seed,
        },
        alpha: l.alpha,
        fuzziness: l.fuzziness,
        skip_selection: l.skip_selection,
        discretize_on_train: l.discretize_on_train,
        bic_error: l.bic_error,
    })
}

#[derive(Serialize)]
struct TrainReport {
    #[serde(flatten)]
    run: RunReport,
    config: Echo,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let d = load(&a.data)?;
    let cfg = train_config(&a.learn)?;
    let mut echo = Echo::new(&cfg);
    let (model, run) = match (a.folds, a.fold, &a.test) {
        (Some(k), Some(f), _) => {
            let split = kfold_split(&d, k, cfg.seed())?;
            if f >= k {
                return Err(Error::InvalidArgument(format!("fold {f} out of range for {k} folds")));
            }
            echo.folds = Some(k);
            echo.fold = Some(f);
            pipeline::run_fold(&d, &split, f, &cfg)?
        }
        (_, _, Some(test_path)) => {
            let test = load_dataset(test_path, a.data.format.unwrap_or_else(|| Format::from_path(test_path)))?;
            if test.p() != d.p() {
                return Err(Error::InvalidArgument(format!(
                    "test file has {} inputs, training file has {}",
                    test.p(),
                    d.p()
                )));
            }
            let model = pipeline::train(&d, &cfg)?;
            let errors = pipeline::evaluate(&model.rulebase, &test);
            let run = RunReport::new(&model, Some(errors));
            (model, run)
        }
        _ => {
            let model = pipeline::train(&d, &cfg)?;
            let run = RunReport::new(&model, None);
            (model, run)
        }
    };
    model.model.save(&a.output)?;
    let report = TrainReport { run, config: echo };
    write_json(&report, a.report.as_deref())
}

/// Column of each model input in the CSV header, matched by name, or the
/// leading columns when the names do not all appear.
fn input_columns(header: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>> {
    let by_name: Option<Vec<usize>> = names
        .iter()
        .map(|n| header.iter().position(|h| h.trim() == *n))
        .collect();
    match by_name {
        Some(cols) => Ok(cols),
        None if header.len() >= names.len() => Ok((0..names.len()).collect()),
        None => Err(Error::InvalidArgument(format!(
            "input has {} columns, model expects {}",
            header.len(),
            names.len()
        ))),
    }
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let rb = model.to_rulebase()?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&a.input)?;
    let cols = input_columns(reader.headers()?, &model.input_names())?;
    let mut out = String::from("prediction\n");
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let x = cols
            .iter()
            .map(|&c| {
                record.get(c).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                    path: a.input.clone(),
                    line: row + 2,
                    message: format!("column {} is not a number", c + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push_str(&format!("{}\n", rb.predict(&x)));
    }
    match &a.output {
        Some(p) => fs::write(p, out)?,
        None => print!("{out}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct CrossvalReport {
    config: Echo,
    folds: Vec<pipeline::FoldReport>,
    mean: pipeline::Summary,
}

fn jobs(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var("FRULER_JOBS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("FRULER_JOBS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

pub fn crossval(a: CrossvalArgs) -> Result<()> {
    let d = load(&a.data)?;
    let cfg = train_config(&a.learn)?;
    let jobs = jobs(a.jobs)?;
    let mut echo = Echo::new(&cfg);
    echo.folds = Some(a.folds);
    echo.trials = Some(a.trials);
    echo.jobs = jobs;
    if a.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker threads: {e}")))?;
    let outcome = pool.install(|| pipeline::crossval(&d, a.folds, a.trials, &cfg))?;

    fs::create_dir_all(&a.out_dir)?;
    for (fold, model) in outcome.folds.iter().zip(&outcome.models) {
        model.save(a.out_dir.join(format!("model_t{}_f{}.json", fold.trial, fold.fold)))?;
    }
    let summary = &outcome.summary;
    println!(
        "test_mse {:.6} (plain {:.6})  rules {:.2}  reduction {:.2}%",
        summary.test_mse, summary.test_mse_plain, summary.n_rules, summary.reduction_pct
    );
    let report = CrossvalReport {
        config: echo,
        folds: outcome.folds,
        mean: outcome.summary,
    };
    write_json(&report, Some(&a.out_dir.join("report.json")))
}

fn label_name(l: usize, g: usize) -> String {
    format!("L{}/{}", l + 1, g)
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    model.to_rulebase()?;
    let scale = if a.normalize {
        let max = model
            .rules
            .iter()
            .flat_map(|r| r.beta.iter())
            .fold(0.0f64, |m, b| m.max(b.abs()));
        if max > 0.0 {
            max
        } else {
            1.0
        }
    } else {
        1.0
    };
    let names = model.input_names();
    let granularities: Vec<String> = model
        .variables
        .iter()
        .map(|v| format!("{}={}", v.name, v.granularity))
        .collect();
    println!("# {} rules; granularities {}", model.rules.len(), granularities.join(" "));
    for (k, rule) in model.rules.iter().enumerate() {
        let terms: Vec<String> = rule
            .antecedent
            .iter()
            .enumerate()
            .filter_map(|(j, l)| l.map(|l| format!("{} is {}", names[j], label_name(l, model.variables[j].granularity))))
            .collect();
        let condition = if terms.is_empty() {
            "TRUE".to_string()
        } else {
            terms.join(" AND ")
        };
        let weights: Vec<String> = rule
            .beta
            .iter()
            .map(|b| if a.normalize { b.abs() / scale } else { *b })
            .map(|b| b.to_string())
            .collect();
        println!("R{}: IF {} THEN [{}]", k + 1, condition, weights.join(", "));
    }
    Ok(())
}
