use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("numeric failure at step {step}: {reason}")]
    NumericFailureAt { step: usize, reason: String },

    #[error("trajectory diverged at step {step} (|entry| > 1e9)")]
    Diverged { step: usize },

    #[error("not differentiable: {0}")]
    NonDifferentiable(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("encoder `{0}` has no inverse")]
    NotInvertible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {reason}")]
    Corrupt { path: PathBuf, line: u64, reason: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front-end.
    ///
    /// 2 config/input error, 3 data corruption, 4 schema mismatch,
    /// 5 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Io { .. }
            | Error::NotInvertible(_)
            | Error::NonDifferentiable(_) => 2,
            Error::Corrupt { .. } => 3,
            Error::SchemaMismatch(_) => 4,
            Error::NumericFailure(_)
            | Error::NumericFailureAt { .. }
            | Error::Diverged { .. }
            | Error::Degenerate(_) => 5,
        }
    }
}
