//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector did not match the dimension expected by the model or grid.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A parameter or argument failed validation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A state became non-finite during time stepping.
    #[error("integration blow-up at step {step} ({context})")]
    BlowUp { step: usize, context: String },

    /// More replicas were excluded (blow-up) than the experiment tolerates.
    #[error("experiment failure: {excluded} of {total} replicas excluded (> {limit_percent}%)")]
    TooManyExclusions {
        excluded: usize,
        total: usize,
        limit_percent: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
