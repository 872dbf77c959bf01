use thiserror::Error;

use crate::lattice::FrequencyIndex;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "frequency vector is rationally dependent at machine precision: alpha . {witness} = 0"
    )]
    RationalDependence { witness: FrequencyIndex },

    #[error("lattice index (0, 0) is not admissible")]
    ZeroIndex,

    #[error("index {index} lies outside truncation radius {radius}")]
    OutsideTruncation { index: FrequencyIndex, radius: i64 },

    #[error("p = {p} and q = {q} are not coprime (or q < 1)")]
    NotCoprime { p: i64, q: i64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "Hermitian symmetry violated: residue {residue:.3e} exceeds threshold {threshold:.3e}"
    )]
    SymmetryViolation { residue: f64, threshold: f64 },

    #[error("Picard iteration failed at t = {time}: residual {residual:.3e} after {iterations} iterations")]
    PicardDivergence {
        time: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("kappa^2 = {kappa_sq} is below 4 ||q||_inf = {required}")]
    HypothesisViolated { kappa_sq: f64, required: f64 },

    #[error("window too small: truncation envelope {envelope:.3e} exceeds tolerance {tol:.3e}")]
    DomainTooSmall { envelope: f64, tol: f64 },

    #[error("grids or spectral parameters do not match")]
    GridMismatch,

    #[error("initial data differ by {max_difference:.3e}")]
    InitialDataMismatch { max_difference: f64 },

    #[error("quadrature needs {required} points, limit is {limit}")]
    UnderResolved { required: usize, limit: usize },

    #[error("point {x} is not a grid node")]
    NotOnGrid { x: f64 },

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name, used in structured error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RationalDependence { .. } => "RationalDependence",
            Error::ZeroIndex => "ZeroIndex",
            Error::OutsideTruncation { .. } => "OutsideTruncation",
            Error::NotCoprime { .. } => "NotCoprime",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SymmetryViolation { .. } => "SymmetryViolation",
            Error::PicardDivergence { .. } => "PicardDivergence",
            Error::HypothesisViolated { .. } => "HypothesisViolated",
            Error::DomainTooSmall { .. } => "DomainTooSmall",
            Error::GridMismatch => "GridMismatch",
            Error::InitialDataMismatch { .. } => "InitialDataMismatch",
            Error::UnderResolved { .. } => "UnderResolved",
            Error::NotOnGrid { .. } => "NotOnGrid",
            Error::InvariantViolated(_) => "InvariantViolated",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
