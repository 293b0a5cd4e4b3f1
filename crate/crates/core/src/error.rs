use thiserror::Error;

/// Errors raised by the quadrature, channel and solver layers.
#[derive(Debug, Error)]
pub enum CapaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel singularity: {0}")]
    Singularity(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CapaError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CapaError {
    CapaError::InvalidArgument(msg.into())
}
