use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, HeisError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HeisError::InvalidArgument(msg.into()))
}
