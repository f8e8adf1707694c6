use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum RpcaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<RpcaError>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RpcaError>;
