use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{what} is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { what: String, deviation: f64 },

    #[error("gate is not an involution (|g·g - I| = {deviation:.3e})")]
    NotInvolution { deviation: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("unknown sequence family `{0}`")]
    UnknownFamily(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sequence kind mismatch: {0}")]
    Kind(String),

    #[error("propagator is not unitary: score radicand {radicand:.3e}")]
    BrokenUnitary { radicand: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File { path: path.into(), source }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
