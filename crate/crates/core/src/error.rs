use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular: pivot magnitude {pivot:e} below threshold {threshold:e}")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix dimension {dim} exceeds the eigenvalue limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    /// Carries whatever eigenvalues were isolated before the cap, as (re, im).
    #[error("eigenvalue iteration did not converge within {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        partial: Vec<(f64, f64)>,
    },

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("invalid selection probabilities: {0}")]
    InvalidSelection(String),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("autocovariance series not converged after {lags} lags (partial value {partial})")]
    TruncationNotConverged { lags: usize, partial: f64 },

    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u128, cap: u128 },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::NoConvergence { .. }
                | Error::NotPositiveDefinite(_)
                | Error::TruncationNotConverged { .. }
                | Error::DivisionByZero(_)
        )
    }
}
