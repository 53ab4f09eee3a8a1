use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: n = {0}, need at least 8 nodes per side")]
    GridTooCoarse(usize),

    #[error("analytic basis available only for rectangles")]
    RectangleBasisOnly,

    #[error("diagonal singularity: Green function evaluated at x = y")]
    DiagonalSingularity,

    #[error("point outside domain: {0}")]
    OutsideDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("quadrature configuration: {0}")]
    QuadratureConfig(String),

    #[error("covariance not positive definite after jitter (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("field and test function live on different grids")]
    GridMismatch,

    #[error("calibration failure: fit residual {residual:.3} exceeds 5%")]
    CalibrationFailure { residual: f64 },

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("event log is missing required records: {0}")]
    MissingRecords(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
