use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The gradient vanished at the current iterate; the caller has to resample.
    #[error("zero gradient (squared norm {gradsq:e})")]
    ZeroGradient { gradsq: f64 },

    #[error("insufficient metadata: {0}")]
    InsufficientMetadata(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported set: {0}")]
    UnsupportedSet(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("numerical failure at iteration {k}: {detail}")]
    NumericalFailure { k: usize, detail: String },

    #[error("malformed trajectory file {path}: {reason}")]
    MalformedTrajectory { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 3 for numerical failures, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure { .. } => 3,
            _ => 2,
        }
    }
}
