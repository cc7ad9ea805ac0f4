use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EseemError {
    #[error("matrix is not Hermitian (max |M - M^dagger| = {residual:e}, tolerance {tolerance:e})")]
    NotHermitian { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid spin quantum number: {0}")]
    InvalidSpin(String),

    #[error("invalid projection m = {m} for spin {spin}")]
    InvalidProjection { m: f64, spin: f64 },

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("operator couples different nuclear projections (max cross-block element {0:e})")]
    NotBlockDiagonal(f64),

    #[error("stepped integrator substep {substep_s:e} s exceeds 1/(20 f_mw) = {limit_s:e} s")]
    SubstepTooLarge { substep_s: f64, limit_s: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("non-uniform tau grid (relative spacing deviation {0:e})")]
    NonUniformGrid(f64),

    #[error("trace too short for spectral analysis: {0} points")]
    TraceTooShort(usize),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("insufficient data: {points} points for {parameters} parameters (need {required})")]
    InsufficientData {
        points: usize,
        parameters: usize,
        required: usize,
    },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, EseemError>;
