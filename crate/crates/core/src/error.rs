use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An allometric or demographic function was called outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A parameter file failed validation; `key` names the offending entry.
    #[error("invalid parameter `{key}`: {reason}")]
    Param { key: String, reason: String },

    #[error("parameter file {path}: {message}")]
    ParamParse { path: PathBuf, message: String },

    #[error("raster {path}: {message}")]
    Raster { path: PathBuf, message: String },

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("run directory {path}: {message}")]
    RunDir { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Param {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
