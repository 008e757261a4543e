use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} must be a power of two and at least 8")]
    InvalidGrid(usize),

    #[error("{what}: expected {expected} samples, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what}: non-finite value at index {index}")]
    NonFiniteSample { what: &'static str, index: usize },

    #[error("{name} = {value} out of range: {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("step budget of {budget} exhausted at t = {time}")]
    StepBudget { budget: usize, time: f64 },

    #[error("non-finite state encountered at t = {time}")]
    NonFiniteState { time: f64 },

    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("not enough data: {0}")]
    TooFewPoints(String),

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("norm drift {drift:e} at t = {time} exceeds 1e-6; tighten step control")]
    NormDrift { drift: f64, time: f64 },

    #[error("trace drift {drift:e} at t = {time} exceeds 1e-6")]
    TraceDrift { drift: f64, time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
