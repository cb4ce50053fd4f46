use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("axis misuse: {0}")]
    AxisMisuse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
