use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("enumeration cap exceeded: {what} has {size} elements (cap {cap})")]
    CapExceeded { what: String, size: String, cap: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("oracle budget exhausted: budget is {budget} queries")]
    BudgetExhausted { budget: usize },

    #[error("alternative hypothesis requested but no planted set is present")]
    MissingPlanted,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for errors the CLI reports as cap or hypothesis violations.
    pub fn is_cap_or_hypothesis(&self) -> bool {
        matches!(
            self,
            Error::CapExceeded { .. } | Error::HypothesisViolated(_) | Error::BudgetExhausted { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
