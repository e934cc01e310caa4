use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: &'static str, reason: String },

    #[error("test function support violation: {0}")]
    SupportViolation(String),

    #[error("under-resolved on the lattice: {0}")]
    Resolution(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("noise coupling mismatch: {0}")]
    CouplingMismatch(String),

    #[error("positivity lost at step {step}, index {index} (Z = {value:e}); reduce dt")]
    PositivityLoss {
        step: usize,
        index: usize,
        value: f64,
    },

    #[error("noise-scale precondition violated: dt*rate = {product:e} exceeds {limit}")]
    NoisePrecondition { product: f64, limit: f64 },

    #[error("logarithm of non-positive value {value:e} at step {step}, index {index}")]
    Domain {
        step: usize,
        index: usize,
        value: f64,
    },

    #[error("|h| exceeded bound {bound:e} at step {step}, index {index} (h = {value:e})")]
    Overflow {
        step: usize,
        index: usize,
        value: f64,
        bound: f64,
    },

    #[error("sequence path {path} varies in x at time row {step}")]
    NotXIndependent { path: usize, step: usize },

    #[error("invalid sequence field: {0}")]
    Sequence(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed dump metadata {path}: {source}")]
    Metadata {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
