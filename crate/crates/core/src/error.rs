use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("empty input to {0}")]
    Empty(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{msg} in {doc}")]
    InvalidDocument { doc: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("need at least {needed} documents, got {got}")]
    TooFewDocuments { needed: usize, got: usize },
    #[error("instance with {n} mentions exceeds brute-force limit of {max}")]
    InstanceTooLarge { n: usize, max: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("config fingerprint mismatch: checkpoint has {found}, requested {expected}")]
    Fingerprint { expected: String, found: String },
    #[error("model file: {0}")]
    Format(String),
    #[error("missing forward cache for {0}")]
    MissingCache(&'static str),
    #[error("mention index {index} outside universe of {universe}")]
    Universe { index: usize, universe: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
