use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("total conflict between categorical masses")]
    TotalConflict,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid world spec: {0}")]
    InvalidSpec(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("sequence alignment: {0}")]
    Alignment(String),

    #[error("format error in {file} at byte {offset}: {msg}")]
    Format { file: String, offset: u64, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {file}: {source}")]
    Json {
        file: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(file: impl Into<String>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Format { file: file.into(), offset, msg: msg.into() }
    }
}
