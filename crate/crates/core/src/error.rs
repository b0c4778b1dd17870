//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the solver, simulation, analysis, and I/O layers.
#[derive(Debug, Error)]
pub enum CoreError {
    /// An input parameter is outside the physically meaningful domain.
    #[error("invalid input: {0}")]
    Domain(String),

    /// A numerical routine failed to converge or found no solution.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A fit did not converge or the data cannot constrain the model.
    #[error("fit failure: {0}")]
    Fit(String),

    /// A byte stream or text file does not match the expected format.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CoreError::Domain(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        CoreError::Solver(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        CoreError::Fit(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        CoreError::Format(msg.into())
    }
}
