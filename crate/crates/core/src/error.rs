use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the simulator, the processing pipeline and the campaign I/O layer.
///
/// Variants are split so that callers can tell bad input (`Validation`,
/// `InsufficientData`, `Parse`) from environmental failures (`Io`).
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or record violates a documented precondition. `field` names the offender.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    /// Not enough samples, stations or sweep points to run an operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A structurally malformed input file.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn insufficient(message: impl Into<String>) -> Self {
        Error::InsufficientData(message.into())
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the content of the inputs rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

/// Rejects NaN and infinities.
pub(crate) fn ensure_finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {value}")))
    }
}
