use thiserror::Error;

/// Errors raised by estimation, testing and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("information matrix is singular or not positive definite")]
    SingularInformation,

    #[error("numerical integration failed: {0}")]
    IntegrationFailure(String),

    #[error("root is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracketing { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("degenerate statistic: variance {variance:e} is not positive")]
    DegenerateStatistic { variance: f64 },

    #[error("serial dependence test cannot be constructed: {0}")]
    SerialTestUndefined(String),

    #[error("marginal density underflow for y = {y}, m = {m}")]
    Underflow { y: u32, m: u32 },

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures that reflect the data rather than the caller:
    /// boundary estimates and degenerate variances.
    pub fn is_statistical_degeneracy(&self) -> bool {
        matches!(self, Error::DegenerateStatistic { .. } | Error::SerialTestUndefined(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
