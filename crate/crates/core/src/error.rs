use thiserror::Error;

/// Errors raised by the scheduling library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("epsilon {epsilon} outside [e^-{k}, 1)")]
    InvalidEpsilon { epsilon: f64, k: usize },

    #[error("infeasible budget: cannot select {k} of {n} sensors")]
    InfeasibleBudget { k: usize, n: usize },

    #[error("sensor {0} is already selected")]
    DuplicateSelection(usize),

    #[error("instance too large: {what} needs {required}, cap is {cap}")]
    InstanceTooLarge { what: &'static str, required: u128, cap: u128 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid triplet {0}")]
    InvalidTriplet(String),
}

pub type Result<T> = std::result::Result<T, Error>;
