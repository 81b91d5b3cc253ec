use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("alternative index {index} out of range for market of {len} alternatives")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("search path is not a permutation of 0..{0}")]
    NotAPermutation(usize),

    #[error("variance must be finite and non-negative, got {0}")]
    InvalidVariance(f64),

    #[error("search cost must be finite and positive, got {0}")]
    InvalidCost(f64),

    #[error("threshold solver failed for cost {cost}: {reason}")]
    NoConvergence { cost: f64, reason: String },

    #[error("market results come from different cells: {0}")]
    MismatchedCells(String),

    #[error("cell (diversity={diversity}, cost={cost}): {source}")]
    Cell {
        diversity: f64,
        cost: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
