use thiserror::Error;

/// Errors raised across the mixture toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("covariance is not positive definite: {0}")]
    Singular(String),

    #[error("covariance is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {n} points for {required} required")]
    InsufficientData { n: usize, required: usize },

    #[error("EM fit failed: {0}")]
    FitFailure(String),

    #[error("quadrature did not reach tolerance (error estimate {estimate:e}, value {value})")]
    Precision { value: f64, estimate: f64 },

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("requested {k} groups from {l} components")]
    TooManyGroups { k: usize, l: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("partition grids do not match")]
    GridMismatch,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("transport solver did not converge after {0} pivots")]
    SolverStalled(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
