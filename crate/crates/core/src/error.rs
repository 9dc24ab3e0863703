//! Error type shared across the crate.

/// Errors raised by factorization, spectral and simulation routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A matrix that must be nonsingular is singular to working tolerance.
    /// Carries the name of the offending matrix (and level where relevant).
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Bidiagonal/tridiagonal band structures do not combine.
    #[error("band mismatch: {0}")]
    BandMismatch(String),

    /// Block dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A block generator failed at a specific level.
    #[error("block generation failed at level {level}: {reason}")]
    Generator { level: usize, reason: String },

    /// A quadrature rule does not reach the exactness degree an integral needs.
    #[error("quadrature exactness {available} insufficient (need {required})")]
    InsufficientExactness { required: usize, available: usize },

    /// A freshly built quadrature rule failed its moment verification.
    #[error("quadrature verification failed: {0}")]
    QuadratureVerification(String),

    /// User-supplied data violates a contract (row sums, reach sets, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// The requested combination of options is not supported.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Serialization / deserialization problem in one of the file formats.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn singular_at(what: &str, level: usize) -> Self {
        Error::Singular(format!("{what} at level {level}"))
    }
}
