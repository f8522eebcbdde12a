//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor or layer dimensions do not line up.
    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: String, detail: String },

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value is invalid; names the offending field.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// CSV parse failure with source location.
    #[error("parse error in {path} at row {row}, column `{column}`: {reason}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },

    /// A binary artifact failed its integrity checks.
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    /// Artifacts a command needs are absent.
    #[error("missing artifact: {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
