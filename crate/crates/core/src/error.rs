//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by scheme construction, operator assembly, solvers and studies.
#[derive(Debug, Error)]
pub enum Error {
    /// A BDF order outside the supported range was requested.
    #[error("BDF order k={k} is outside the supported range {min}..={max}")]
    InvalidOrder { k: usize, min: usize, max: usize },

    /// A parameter failed its precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The diffusion coefficient a(u) became non-positive during assembly.
    /// Carries the interior node index and the offending value.
    #[error("coefficient positivity violated at node {node}: a = {value:.6e}")]
    CoefficientPositivity { node: usize, value: f64 },

    /// Vector/matrix dimensions do not match.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A linear solve broke down or did not reach the requested tolerance.
    #[error("linear solve failed: {reason} (relative residual {residual:.3e})")]
    LinearSolve { reason: String, residual: f64 },

    /// Newton iteration exceeded its cap without meeting the tolerance.
    #[error("Newton did not converge in {iterations} iterations (last residual {residual:.3e})")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    /// A multiplier or G-matrix certificate could not be established.
    #[error("certification failed: {0}")]
    Certification(String),

    /// A time step failed; wraps the underlying error with the step index.
    #[error("step n={step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Study configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach the failing step index to an error propagating out of a run.
    pub fn at_step(self, step: usize) -> Error {
        Error::StepFailed {
            step,
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping any step annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } => source.root(),
            other => other,
        }
    }
}
