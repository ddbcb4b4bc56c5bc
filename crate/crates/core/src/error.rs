use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MsaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("annotation has no non-silent segment")]
    EmptyAnnotation,
}

pub type Result<T> = std::result::Result<T, MsaError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MsaError::InvalidInput(msg.into()))
}
