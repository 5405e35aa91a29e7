use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("map is not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires a qubit channel, got {in_dim} -> {out_dim}")]
    NotQubit { in_dim: usize, out_dim: usize },

    #[error("operation requires a unital channel (translation norm {translation:.3e})")]
    NotUnital { translation: f64 },

    #[error("operation requires a non-unital channel")]
    Unital,

    #[error("unitary channel: outside the scope of the memory-time bound (noise must be non-unitary)")]
    UnitaryChannel,

    #[error("dimension {dim} exceeds the supported maximum {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("capacity certificate {upper} is below the computed lower bound {lower}")]
    InconsistentCapacity { lower: f64, upper: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("circuit exceeds desk-scale limits: {0}")]
    CapExceeded(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
