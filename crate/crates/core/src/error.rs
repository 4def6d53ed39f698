use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A query outside the valid range (e.g. a time past the end of a profile).
    #[error("range error: {0}")]
    Range(String),

    /// Vector or parameter shapes that do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

/// Problems found while reading or validating a scenario description.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },

    #[error("invalid `{key}`: {message}")]
    Invariant { key: String, message: String },

    #[error("scenarios cannot be compared: {0}")]
    Mismatch(String),

    #[error("empty grid: {0}")]
    EmptyGrid(String),
}

impl ConfigError {
    pub(crate) fn invariant(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invariant {
            key: key.to_owned(),
            message: message.into(),
        }
    }

    /// The offending key, when the error is attributable to one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. }
            | ConfigError::BadValue { key, .. }
            | ConfigError::Invariant { key, .. } => Some(key),
            _ => None,
        }
    }
}
