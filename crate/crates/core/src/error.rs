use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("krylov solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("newton iteration failed after {iterations} steps (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("steady state landed on the wrong branch (min value {min:e})")]
    WrongBranch { min: f64 },

    #[error("{field} went negative at step {step} (value {value:e}); reduce the time step")]
    NegativeState {
        field: &'static str,
        step: usize,
        value: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("power iteration stagnated after {iterations} iterations (last estimate {lambda})")]
    Stagnation { iterations: usize, lambda: f64 },

    #[error("eigenvector iterate lost positivity (min {min:e})")]
    PositivityLost { min: f64 },

    #[error("trajectory mismatch: {0}")]
    TrajectoryMismatch(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
