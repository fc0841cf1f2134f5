use thiserror::Error;

/// Errors raised by constructors, transformations and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size cap exceeded: {what} = {value} > {cap}")]
    CapExceeded { what: &'static str, value: usize, cap: usize },

    #[error("vector not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("operator not hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("operator not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace is {trace}, expected 1")]
    BadTrace { trace: f64 },

    #[error("localizer violates 0 <= BB* <= 1 (largest eigenvalue of B*B is {max_eigenvalue})")]
    NotContraction { max_eigenvalue: f64 },

    #[error("statistics mismatch: {0}")]
    StatisticsMismatch(String),

    #[error("particle number {requested} exceeds truncation {max}")]
    ParticleOverflow { requested: usize, max: usize },

    #[error("truncated tail weight {tail:e} exceeds tolerance {tolerance:e}")]
    Truncation { tail: f64, tolerance: f64 },

    #[error("incomplete density-matrix table: missing ({p},{q})")]
    IncompleteTable { p: usize, q: usize },

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
