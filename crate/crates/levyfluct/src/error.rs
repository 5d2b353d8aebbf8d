use thiserror::Error;

#[derive(Debug, Error)]
pub enum FluctError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FluctError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(FluctError::InvalidInput(msg.into()))
}
