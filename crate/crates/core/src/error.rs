use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid sentence: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("infeasible generator config: {0}")]
    Infeasible(String),

    #[error("ambiguous grid encoding: {0}")]
    Ambiguous(String),

    #[error("unknown piece id {id} (table has {rows} rows)")]
    UnknownPiece { id: usize, rows: usize },

    #[error("event type {0} out of range")]
    EventTypeOutOfRange(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("{0}")]
    NonFiniteLoss(String),

    #[error("grid too large for brute-force oracle: n = {0} > 8")]
    OracleTooLarge(usize),

    #[error("nothing to check")]
    NothingToCheck,

    #[error("nothing to benchmark")]
    NothingToBenchmark,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
