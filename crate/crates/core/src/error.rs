use thiserror::Error;

/// Errors produced by construction and operation preconditions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("expected a homogeneous grade-1 element")]
    NotGradeOne,

    #[error("grade {grade} out of range for dimension {dim}")]
    GradeOutOfRange { grade: usize, dim: usize },

    #[error("dimension {0} unsupported (1..=6)")]
    UnsupportedDimension(usize),

    #[error("polynomial is not componentwise harmonic (laplacian residual {residual:.3e})")]
    NotHarmonic { residual: f64 },

    #[error("field H is not monogenic (dirac-minus residual {residual:.3e})")]
    NotMonogenic { residual: f64 },

    #[error("coefficient norm M = {m} is not < 1")]
    CoefficientNormTooLarge { m: f64 },

    #[error("ellipticity violated at node {node}: {detail}")]
    EllipticityViolation { node: usize, detail: String },

    #[error("coefficient matrix is not normal at node {node} (commutator norm {defect:.3e})")]
    NotNormal { node: usize, defect: f64 },

    #[error("grade purity violated: norm outside grades {{0,2}} is {off_grade:.3e} vs total {total:.3e}")]
    GradePurity { off_grade: f64, total: f64 },

    #[error("field fails the solution residual gate: relative residual {residual:.3e} > {gate:.3e}")]
    ResidualGate { residual: f64, gate: f64 },

    #[error("operator does not act on non-periodic polynomial parts")]
    PolynomialPartUnsupported,

    #[error("iteration budget exceeded: {iterations} iterations, residual {residual:.3e}")]
    IterationBudget { iterations: usize, residual: f64 },

    #[error("family too small: {size} members (need >= {min})")]
    FamilyTooSmall { size: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
