use alloc::string::String;
use core::fmt;

use crate::scenario::ReceiverKind;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidArgument(String),
    /// The system load is outside the region where the target SIR can be met.
    InfeasibleLoad {
        receiver: ReceiverKind,
        alpha: f64,
        gamma_star: f64,
    },
    /// An iterative solver ran out of iterations.
    SolverFailure { iterations: usize, residual: f64 },
    /// A Gram matrix was numerically singular.
    Singular { condition_estimate: f64 },
    /// Parameters outside the validity range of an approximation.
    UnsupportedParameters(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedParameters(msg.into())
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InfeasibleLoad { .. } => "infeasible_load",
            Error::SolverFailure { .. } => "solver_failure",
            Error::Singular { .. } => "singular",
            Error::UnsupportedParameters(_) => "unsupported_parameters",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InfeasibleLoad {
                receiver,
                alpha,
                gamma_star,
            } => write!(
                f,
                "load alpha = {alpha} is infeasible for the {receiver} receiver at target SIR {gamma_star}"
            ),
            Error::SolverFailure {
                iterations,
                residual,
            } => write!(
                f,
                "fixed-point solver did not converge after {iterations} iterations (last residual {residual:e})"
            ),
            Error::Singular { condition_estimate } => write!(
                f,
                "Gram matrix is numerically singular (condition estimate {condition_estimate:e})"
            ),
            Error::UnsupportedParameters(msg) => write!(f, "unsupported parameters: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
