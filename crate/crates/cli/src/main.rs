mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fruler_core::discretize::BicError;
use fruler_core::{Error, Format};

#[derive(Parser, Debug)]
#[command(name = "fruler", version, about = "Learn linguistic TSK fuzzy rule bases for regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Instance selection report for a dataset.
    Select(SelectArgs),
    /// Granularity ladders of every input variable.
    Discretize(DiscretizeArgs),
    /// Train one model, optionally testing on a held-out fold or file.
    Train(TrainArgs),
    /// Predict the output of every row of a CSV file.
    Predict(PredictArgs),
    /// k-fold cross-validation, repeated over trials.
    Crossval(CrossvalArgs),
    /// Print the rules of a model file.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// KEEL `.dat` or CSV file, output in the last column.
    data: PathBuf,
    /// Overrides the format implied by the file extension.
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiscretizeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Discretize the selected subset instead of the whole file.
    #[arg(long)]
    selected: bool,
    #[arg(long, value_parser = parse_bic_error, default_value = "pooled")]
    bic_error: BicError,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct LearnArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = 61)]
    population: usize,
    #[arg(long, default_value_t = 0.2)]
    pmut: f64,
    #[arg(long, default_value_t = 5)]
    nls: usize,
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    fuzziness: f64,
    #[arg(long)]
    skip_selection: bool,
    /// Build the granularity ladders from the whole training set.
    #[arg(long)]
    discretize_on_train: bool,
    #[arg(long, value_parser = parse_bic_error, default_value = "pooled")]
    bic_error: BicError,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    learn: LearnArgs,
    /// Split the data into this many folds and hold one out.
    #[arg(long, requires = "fold")]
    folds: Option<usize>,
    /// Held-out fold, 0-based.
    #[arg(long, requires = "folds")]
    fold: Option<usize>,
    /// Separate test file.
    #[arg(long, conflicts_with = "folds")]
    test: Option<PathBuf>,
    #[arg(long, default_value = "model.json")]
    output: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with a header naming the model inputs.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CrossvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Worker threads; the FRULER_JOBS environment variable takes precedence.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory receiving one model per fold and `report.json`.
    #[arg(long, default_value = "crossval")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct InspectArgs {
    model: PathBuf,
    /// Show absolute consequent weights scaled so the largest is 1.
    #[arg(long)]
    normalize: bool,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bic_error(s: &str) -> Result<BicError, String> {
    match s {
        "pooled" => Ok(BicError::Pooled),
        "summed" => Ok(BicError::Summed),
        other => Err(format!("expected `pooled` or `summed`, got `{other}`")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Schema(_) => 3,
        Error::Parse { .. } | Error::EmptyDataset(_) | Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Select(a) => commands::select(a),
        Command::Discretize(a) => commands::discretize(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Crossval(a) => commands::crossval(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
