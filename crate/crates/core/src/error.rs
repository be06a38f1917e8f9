use thiserror::Error;

/// Errors raised by the models, the observability tools and the estimator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("inductance matrix is singular (|det| = {det:e} below floor {floor:e})")]
    SingularInductance { det: f64, floor: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("not available: {0}")]
    NotAvailable(&'static str),

    #[error("degenerate flux: psi_rd must be positive, got {0}")]
    DegenerateFlux(f64),

    #[error("filter diverged at entry {index} (|value| = {value:e} exceeds bound {bound:e})")]
    Divergence { index: usize, value: f64, bound: f64 },

    #[error("innovation covariance is not positive definite")]
    SingularInnovation,

    #[error("t = {t} is outside the profile domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
