use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: label column `{column}` not found in header")]
    MissingLabelColumn { path: PathBuf, column: String },

    #[error("{path}: no data rows")]
    EmptyDataset { path: PathBuf },

    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` as a number")]
    UnparsableCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("backend `{backend}` failed after {attempts} attempt(s): {message}")]
    Backend {
        backend: String,
        attempts: u32,
        message: String,
    },

    #[error("backend `{backend}` returned HTTP {status}: {body}")]
    HttpStatus {
        backend: String,
        status: u16,
        body: String,
    },

    #[error("backend `{0}` returned an empty completion")]
    EmptyCompletion(String),

    #[error("scripted backend has no response for role `{role}`, feature `{feature}`")]
    ScriptKeyMissing { role: String, feature: String },

    #[error("prompt for {role} requires prior turns {expected}, got {got}")]
    MissingPriorTurns {
        role: String,
        expected: String,
        got: String,
    },

    #[error("could not parse a score from the {role} output for `{feature}`")]
    ParseFailure { role: String, feature: String },

    #[error("power iteration did not converge for component {component} (residual {residual:e})")]
    NonConvergence { component: usize, residual: f64 },

    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("thread pool error: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
