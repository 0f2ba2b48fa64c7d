use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension {0} is not even")]
    OddDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symplectic (relative residual {residual:.3e})")]
    NotSymplectic { residual: f64 },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The B block is numerically singular; the caller must take the general route.
    #[error("B block is singular to working precision (sigma_min / sigma_max = {ratio:.3e})")]
    SingularB { ratio: f64 },

    #[error("numerical degeneracy in {stage}: {detail}")]
    Degenerate { stage: &'static str, detail: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("caustic: A + B M is singular (sigma_min = {sigma_min:.3e})")]
    Caustic { sigma_min: f64 },

    #[error("invalid Gaussian state: {0}")]
    InvalidState(String),

    #[error("no admissible factorization shift in scan range")]
    NoAdmissibleShift,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
