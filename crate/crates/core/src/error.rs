use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A policy row puts mass on a successor the uncontrolled kernel forbids.
    #[error("support violation: index {index} has positive mass but is outside the reference support")]
    SupportViolation { index: usize },

    #[error("exp(-v) saturates at state {state} (v = {value})")]
    Saturation { state: usize, value: f64 },

    #[error("initial value function violates T V0 <= V0 at state {state} (excess {excess:e})")]
    InitNotUpperBound { state: usize, excess: f64 },

    #[error("did not converge in {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("value estimate became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("stag cell unreachable from cell {cell}")]
    Unreachable { cell: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the failure is numerical rather than a bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Saturation { .. } | Error::NotConverged { .. } | Error::Diverged { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
