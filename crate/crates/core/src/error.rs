use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver failed: {0}")]
    EigFailure(String),

    #[error("solver failed: {0}")]
    SolveFailure(String),

    #[error("no instability window: {0}")]
    NoInstabilityWindow(String),

    #[error("threshold is unbounded: {0}")]
    Unbounded(String),

    #[error("state is not a coexistence state: {0}")]
    NotCoexistence(String),

    #[error("no limit profile: {0}")]
    NoLimitProfile(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("time step rejected, suggested dt = {suggested:e}")]
    StepRejected { suggested: f64 },

    #[error("relaxation aborted: {0}")]
    Aborted(String),
}

pub type Result<T> = std::result::Result<T, Error>;
