use thiserror::Error;

/// Errors raised by the solver and the verification checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("kernel is not certified against the jump-kernel hypothesis; force-accept it to proceed")]
    NotCertified,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step {dt} exceeds the monotone stability bound {bound}")]
    UnstableStep { dt: f64, bound: f64 },

    #[error("degenerate operator: {0}")]
    Degenerate(String),

    #[error("non-finite value at t = {t}, x = {x}")]
    Diverged { t: f64, x: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {value}, error {error} after {intervals} intervals")]
    Quadrature {
        lo: f64,
        hi: f64,
        value: f64,
        error: f64,
        intervals: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
