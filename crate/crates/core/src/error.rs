use alloc::string::String;
use core::fmt;

/// Failures reported by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A grid, schedule, configuration or argument violated its contract.
    InvalidInput(String),
    /// A field contained NaN or an infinity.
    NonFinite { what: &'static str },
    /// Two fields or traces disagree in size or grid.
    ShapeMismatch { expected: usize, found: usize },
    /// An iterative linear solve stopped short of its tolerance.
    SolveFailed { iterations: usize, residual: f64 },
    /// A nodal value left the invariant box `[-tol, 1 + tol]`.
    InvariantViolation { step: usize, value: f64, tolerance: f64 },
    /// Boundary values of a field do not match the prescribed trace.
    TraceMismatch { max_gap: f64 },
    /// Newton and the pseudo-time fallback both failed to reach the tolerance.
    NotConverged { residual: f64, iterations: usize },
    /// A certificate or detector was called on a run that never stabilized.
    NotStabilized,
    /// Accumulated energy terms were advanced out of step with the trajectory.
    StaleAccumulators { expected: usize, found: usize },
    /// The trajectory blew up (non-finite or runaway values).
    Diverged { step: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NonFinite { what } => write!(f, "non-finite values in {what}"),
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected} values, found {found}")
            }
            Error::SolveFailed { iterations, residual } => write!(
                f,
                "linear solve did not converge after {iterations} iterations (relative residual {residual:e})"
            ),
            Error::InvariantViolation { step, value, tolerance } => write!(
                f,
                "invariant region violated at step {step}: value {value:e} outside [-{tolerance:e}, 1+{tolerance:e}]"
            ),
            Error::TraceMismatch { max_gap } => {
                write!(f, "boundary trace mismatch (max gap {max_gap:e})")
            }
            Error::NotConverged { residual, iterations } => {
                write!(f, "stationary solve failed after {iterations} iterations (residual {residual:e})")
            }
            Error::NotStabilized => write!(f, "trajectory has not stabilized"),
            Error::StaleAccumulators { expected, found } => {
                write!(f, "energy accumulators are at step {found} but the state is at step {expected}")
            }
            Error::Diverged { step } => write!(f, "trajectory diverged at step {step}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
