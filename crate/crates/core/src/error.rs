use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the toolkit.
///
/// Each variant maps onto one of three failure classes (see [`Error::exit_code`]):
/// I/O, validation, or numeric failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("percent deviation undefined for a zero mean")]
    ZeroMean,

    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("insufficient degrees of freedom: {observations} observations for {parameters} parameters")]
    InsufficientDegreesOfFreedom { observations: usize, parameters: usize },

    #[error("rank-deficient design matrix (rank {rank}); dependent basis columns: {}", .dependent.join(", "))]
    RankDeficient { rank: usize, dependent: Vec<&'static str> },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 for I/O, 2 for validation, 3 for numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::RankDeficient { .. } | Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}
