use thiserror::Error;

/// Errors raised across the simulation, estimation and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("non-finite ELBO at iteration {iteration} (coordinate {coordinate:?})")]
    NonFiniteElbo {
        iteration: usize,
        coordinate: Option<usize>,
        trace_tail: Vec<f64>,
    },

    #[error("no within-category variation: {0}")]
    NoVariation(String),

    #[error("empty split: {0}")]
    EmptySplit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dimension(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
