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

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transform error on column `{column}`: {message}")]
    Transform { column: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("fit did not converge after {iterations} iterations (last log-likelihood {loglik})")]
    Fit {
        iterations: usize,
        loglik: f64,
        trace: Vec<f64>,
    },

    #[error("training diverged at iteration {iteration}: non-finite gradient in column {column}")]
    Training { iteration: u64, column: usize },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics rather than by user input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Fit { .. } | Error::Training { .. })
    }
}
