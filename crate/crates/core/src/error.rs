use thiserror::Error;

/// Errors produced by the calculator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "family is not strictly contracting on [-1,1] (largest endpoint image {max_image}); \
         positivize the family first"
    )]
    NotStrictlyContracting { max_image: f64 },

    #[error("invariant arc construction failed: {0}")]
    ArcConstructionFailed(String),

    #[error("conjugated matrix {index} has a non-positive entry ({value:e})")]
    PositivityFailed { index: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("word enumeration needs {needed} words, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
