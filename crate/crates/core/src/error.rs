use std::path::PathBuf;

/// Errors produced by the learning pipeline and its stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("dataset `{0}` has no examples")]
    EmptyDataset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    #[error("nearest-neighbour reference set is too small for leave-one-out evaluation")]
    InsufficientReference,
    #[error("no example is covered by the rule antecedents")]
    EmptyDesign,
    #[error("gradient descent diverged with initial learning rate {eta0}")]
    Divergence { eta0: f64 },
    #[error("model schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
