use thiserror::Error;

/// Errors raised by the linear-algebra kernel, the system definitions and the steppers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("rank-1 update is singular: |1 + beta.alpha| = {denominator:e}")]
    SingularUpdate { denominator: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("potential plus shift is negative ({value:e}); the potential must be bounded below by -eps")]
    NegativePotential { value: f64 },

    #[error("potential vanishes with a non-zero gradient (|grad V| = {gradient_norm:e}); use a positive shift eps")]
    DegeneratePotential { gradient_norm: f64 },

    #[error("solution diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("system has no potential split")]
    NoSplit,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("Newton iteration did not converge in {iterations} iterations (last update {last_update:e})")]
    NewtonNoConvergence { iterations: usize, last_update: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
