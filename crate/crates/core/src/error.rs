//! Error type shared by all modules.

use thiserror::Error;

pub type RodResult<T> = Result<T, RodError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RodError {
    #[error("grid size {0} must be a power of two and at least 16")]
    BadGridSize(usize),
    #[error("half-length must be positive and finite, got {0}")]
    BadHalfLength(f64),
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field contains non-finite values")]
    Poisoned,
    #[error("{name} out of range: {detail}")]
    OutOfRange { name: &'static str, detail: String },
    #[error(
        "grid under-resolves the mollifier: dx = {dx:.3e} exceeds eps/8 = {limit:.3e}; \
         need n_points >= {required_n} (or a larger moll_width)"
    )]
    UnderResolved { dx: f64, limit: f64, required_n: usize },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("particle with label {label} left the domain at t = {time}")]
    ParticleEscaped { label: f64, time: f64 },
    #[error("no logged state at t = {0}")]
    MissingState(f64),
    #[error("sign condition violated: {0}")]
    SignViolation(String),
}

pub(crate) fn out_of_range(name: &'static str, detail: impl Into<String>) -> RodError {
    RodError::OutOfRange { name, detail: detail.into() }
}
