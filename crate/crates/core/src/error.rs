use std::path::PathBuf;

use thiserror::Error;

use crate::scalar::Precision;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cannot ingest {path}: {message} (byte offset {offset})")]
    Ingest {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("precision mismatch: file stores {found} values, this build reads {expected}")]
    PrecisionMismatch {
        expected: Precision,
        found: Precision,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("external vectors do not cover ({split}, {sentence}, {token})")]
    Coverage {
        split: String,
        sentence: usize,
        token: usize,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("tag-set error: {0}")]
    TagSet(String),

    #[error("evaluation error at sentence {sentence}: {message}")]
    Evaluation { sentence: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension { op, left, right }
    }
}
