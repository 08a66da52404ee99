//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or length mismatch between operands.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid or insufficient input data (missing classes, bad labels, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A numeric routine failed (singular system, non-convergence, overflow).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An argument is outside its legal range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A file or stream could not be decoded.
    #[error("parse error: {0}")]
    Parse(String),

    /// Model or report persistence failed (bad magic, version, truncation).
    #[error("persistence error: {0}")]
    Persistence(String),

    /// The operation is not defined for this model kind.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Training diverged.
    #[error("training error at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Unsupported(_) => 1,
            Error::Numeric(_) | Error::Training { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
