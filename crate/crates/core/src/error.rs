use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "{dim} candidate covariates exceed the enumeration limit of {limit}; \
         subset search scales as 2^D, reduce the dimensionality first"
    )]
    Capacity { dim: usize, limit: usize },

    #[error(
        "{found} environment(s) supplied; at least 2 are required, a single \
         environment permits no causal conclusion"
    )]
    InsufficientEnvironments { found: usize },

    #[error("trajectory diverged at step {step} (|state| > {bound:e})")]
    Divergence { step: usize, bound: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
