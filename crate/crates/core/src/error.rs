use thiserror::Error;

/// Errors surfaced by the sampling, planning and accounting layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("potential misconfigured: {0}")]
    Potential(String),

    #[error("gradient descent did not reach tolerance {tol:e} within {iterations} iterations (gradient norm {residual:e})")]
    NoConvergence {
        tol: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },

    #[error("state is absorbed in the bottom state")]
    Bottom,

    #[error("order mismatch: {0}")]
    OrderMismatch(String),

    #[error("direction mismatch: {0}")]
    DirectionMismatch(String),

    #[error("divergence is infinite: {0}")]
    InfiniteDivergence(String),

    #[error("numeric oracle failed: {0}")]
    Oracle(String),

    #[error("infeasible: {violated} (largest feasible step size {max_feasible_eta:?})")]
    Infeasible {
        violated: String,
        max_feasible_eta: Option<f64>,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("privacy accounting refused: {0}")]
    Refused(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
