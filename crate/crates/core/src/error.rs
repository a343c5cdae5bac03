use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no samples for alternative {0}")]
    NoSamples(usize),

    #[error("insufficient samples for threshold: alternative {index} has {have}, needs {need}")]
    InsufficientSamples { index: usize, have: usize, need: usize },

    #[error("no sample strictly exceeds threshold {gamma} for alternative {index}")]
    NoExceedances { index: usize, gamma: f64 },

    #[error("{0} does not exist for this distribution")]
    MomentUndefined(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
