use thiserror::Error;

/// Errors produced by the decoding, signal and sequence machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlpError {
    #[error("invalid mixing matrix: {0}")]
    InvalidMixing(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sequence generation failed: {0}")]
    GenerationFailed(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LlpError {
    fn from(e: std::io::Error) -> Self {
        LlpError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LlpError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(LlpError::DimensionMismatch { expected, got });
    }
    Ok(())
}
