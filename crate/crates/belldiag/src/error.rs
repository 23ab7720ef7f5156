use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum BellError {
    #[error("unsupported dimension {0}: {1}")]
    Dimension(usize, &'static str),

    #[error("invalid simplex coordinates: {0}")]
    InvalidCoordinates(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix trace {0:?} is not 1")]
    TraceNotOne(num_complex::Complex<f64>),

    #[error("criterion {0} is not available for d={1}")]
    UnsupportedCriterion(&'static str, usize),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("configured cap exceeded: {0}")]
    CapExceeded(String),

    #[error("missing or unusable asset: {0}")]
    MissingAsset(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
