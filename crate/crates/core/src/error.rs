use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {defect:e}")]
    NotSymmetric { row: usize, col: usize, defect: f64 },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("operator is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("starting vector must have unit norm, got norm {0}")]
    NonUnitStart(f64),

    #[error("degenerate Lanczos factorization (zero steps)")]
    EmptyFactorization,

    #[error("density grid too narrow: {leaked:.3e} of the mass falls outside the grid")]
    GridTooNarrow { leaked: f64 },

    #[error("grids differ after resampling")]
    GridMismatch,

    #[error("negative density value {value:e} at grid index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("spectrum scale must be positive, got {0:e}")]
    NonPositiveScale(f64),

    #[error("initial gradient coordinate {0} is zero; the fixed preconditioner is singular")]
    ZeroGradientCoordinate(usize),

    #[error("every run in the grid diverged")]
    AllDiverged,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite activation for sample {0}")]
    NonFiniteActivation(usize),

    #[error("failed to read {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
