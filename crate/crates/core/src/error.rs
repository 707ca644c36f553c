use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error at line {line}: {message}")]
    Validation { line: u64, message: String },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("shape contract violated in {layer}: {message}")]
    Contract { layer: &'static str, message: String },

    #[error("participant {0} has no segments to aggregate")]
    NoSegments(u32),

    #[error("relative difference undefined for baseline {0}")]
    UndefinedBaseline(f64),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// True for errors caused by bad inputs on disk rather than bad settings or bugs.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::SignalTooShort { .. }
                | Error::InsufficientData(_)
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::NoSegments(_)
                | Error::Format { .. }
                | Error::Io { .. }
                | Error::Wav { .. }
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::InvalidArgument(_))
    }
}
