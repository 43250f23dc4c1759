use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A scalar argument is outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A composite input (circuit, gate list, config) fails its consistency checks.
    #[error("validation failed: {0}")]
    Validation(String),
    /// The input sits on a measure-zero degenerate set where the operation is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
