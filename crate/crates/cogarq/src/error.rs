use thiserror::Error;

/// Errors produced by model construction, solvers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// A domain object could not be built from the given data.
    #[error("construction error: {0}")]
    Construction(String),

    /// An operation was called outside its documented domain.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The received feedback has zero likelihood under the current belief.
    #[error("degenerate observation: {0}")]
    DegenerateObservation(String),

    /// An iterative solver failed to converge.
    #[error("solver error: {0}")]
    Solver(String),

    /// A structural property that the solution must satisfy was violated.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// A policy handle was driven with an inconsistent action/observation
    /// sequence.
    #[error("policy state error: {0}")]
    State(String),
}

pub type Result<T> = std::result::Result<T, Error>;
