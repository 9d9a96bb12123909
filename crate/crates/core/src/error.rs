use thiserror::Error;

/// Library-wide error type. Variants are grouped by how callers should react:
/// input problems (bad matrices, malformed records, out-of-range parameters),
/// estimation problems (Monte Carlo or optimizer failure), and requests for
/// record shapes this build does not handle.
#[derive(Debug, Error)]
pub enum TomoError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid {field}: {message}")]
    InvalidInput { field: &'static str, message: String },

    #[error("parameter {name} out of range: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("record/summary mismatch: {0}")]
    SummaryMismatch(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, TomoError>;

impl TomoError {
    pub fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        TomoError::InvalidInput { field, message: message.into() }
    }

    pub fn parameter(name: &'static str, message: impl Into<String>) -> Self {
        TomoError::InvalidParameter { name, message: message.into() }
    }
}
