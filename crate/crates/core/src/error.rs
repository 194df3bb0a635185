use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the synthesis pipeline or the temporal kernel.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {record}: {message}")]
    Parse { record: String, message: String },

    #[error("mask codec error: {0}")]
    Codec(String),

    #[error("image error at {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("weight format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(record: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { record: record.into(), message: message.to_string() }
    }
}
