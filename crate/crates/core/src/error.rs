use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("non-finite value at ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },

    #[error("covariance of sample {sample} is singular even after regularization")]
    SingularCovariance { sample: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing configuration keys: {}", .0.join(", "))]
    MissingConfigKeys(Vec<String>),

    #[error("parameter mode unavailable: {0}")]
    ModeUnavailable(String),

    #[error("matrix is not symmetric (max |S - S^T| = {max_diff:e})")]
    Asymmetry { max_diff: f64 },

    #[error("both classes must be present")]
    SingleClass,

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::MissingConfigKeys(_) | Error::ModeUnavailable(_) => {
                ErrorKind::Usage
            }
            Error::SingularCovariance { .. } | Error::Numerical(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
