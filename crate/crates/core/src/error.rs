use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("audio: {0}")]
    Audio(String),

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("annotation line {line}: {msg}")]
    Annotation { line: usize, msg: String },

    #[error("invalid chord label {label:?}: {msg}")]
    ChordLabel { label: String, msg: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("{0}")]
    Data(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
