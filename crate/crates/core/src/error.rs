use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in element {element} at quadrature point {point}")]
    NumericDomain { element: usize, point: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("singular state in element {element}: {detail}")]
    SingularState { element: usize, detail: String },

    #[error("diverged state: {0}")]
    Diverged(String),

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("time step underflow: tau = {tau:.3e} at t = {t}")]
    StepUnderflow { tau: f64, t: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
