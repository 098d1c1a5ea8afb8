use thiserror::Error;

/// Errors raised by the numerical kernels and the solve pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma function pole at x = {0}")]
    Pole(f64),

    #[error("value overflows f64 in {0}")]
    Overflow(&'static str),

    #[error("second parameter b = {0} is a non-positive integer")]
    ParameterPole(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("no sign change bracketing a root of {0}")]
    NoBracket(String),

    #[error("{what}: found {count} candidate roots where exactly one was expected")]
    MultipleRoots { what: String, count: usize },

    #[error("{0} is outside the range of g")]
    OutOfRange(f64),

    #[error("inconclusive boundary limit: {0}")]
    InconclusiveLimit(String),

    #[error("ordering violated: {0}")]
    Ordering(String),

    #[error("shape check failed: {0}")]
    Shape(String),

    #[error("start rate {start} lies in the stopping region of level {level}")]
    WrongSide { start: f64, level: f64 },

    #[error("eigenvalue search missed a root near k = {0}")]
    MissedRoot(f64),

    #[error("derivative in the first parameter vanishes at k = {0}")]
    DegenerateRoot(f64),

    #[error("selling value function is required to build the buying payoff")]
    UnsolvedDependency,
}

pub type Result<T> = std::result::Result<T, Error>;
