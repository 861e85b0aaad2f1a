use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid probability {0}: must lie in (0, 1]")]
    InvalidProbability(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt file {}: {message}", path.display())]
    CorruptFile { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSize(_) => "invalid-size",
            Error::InvalidProbability(_) => "invalid-probability",
            Error::InvalidParams(_) => "invalid-params",
            Error::InvalidInput(_) => "invalid-input",
            Error::PreconditionViolation(_) => "precondition-violation",
            Error::ConvergenceFailure { .. } => "convergence-failure",
            Error::NumericFailure(_) => "numeric-failure",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::Parse { .. } => "parse-error",
            Error::VersionMismatch { .. } => "version-mismatch",
            Error::CorruptFile { .. } => "corrupt-file",
            Error::Io { .. } => "io-error",
            Error::Json(_) => "json-error",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::CorruptFile {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
