use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("chain is terminal at component {0}; no ready component remains")]
    TerminalState(usize),

    #[error("numerical integrity violated: {0}")]
    NumericalIntegrity(String),

    #[error("uniform stream exhausted after {0} draws")]
    StreamExhausted(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
