//! Error type shared by every module of the laboratory.

use thiserror::Error;

/// Errors raised by the numerical operations.
///
/// Each variant corresponds to one class of precondition or runtime failure so
/// that the command line driver can map it to a message and an exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TslError {
    /// A parameter lies outside the admissible domain of an operation.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A point lies outside the domain where a function is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Sampled input contained a non-finite value or was otherwise unusable.
    #[error("input error: {0}")]
    Input(String),

    /// A traced axis has no grid node at coordinate zero.
    #[error("grid alignment error: {0}")]
    GridAlignment(String),

    /// A field has a nonzero zero-frequency mode where the mean-zero convention is required.
    #[error("mean-zero violation: {0}")]
    MeanZero(String),

    /// A quadrature or iterative method did not reach the requested accuracy.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// A precondition on the structure of the input was violated.
    #[error("precondition error: {0}")]
    Precondition(String),

    /// Construction of an object failed.
    #[error("construction error: {0}")]
    Construction(String),

    /// The computational box is too small for the requested accuracy.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(String),

    /// A configuration could not be parsed or validated.
    #[error("configuration error: {0}")]
    Config(String),
}

impl From<std::io::Error> for TslError {
    fn from(e: std::io::Error) -> Self {
        TslError::Io(e.to_string())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, TslError>;
