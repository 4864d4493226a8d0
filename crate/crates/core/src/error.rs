use std::path::PathBuf;

/// Errors raised anywhere in the link chain, allocators, metrics or harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("equalizer gain h*sqrt(p) is zero")]
    ZeroGain,
    #[error("snr must be non-negative, got {0}")]
    NegativeSnr(f64),

    #[error("need at least two usable samples to fit, got {0}")]
    InsufficientData(usize),
    #[error("every sample has zero measured BER")]
    AllZeroBer,
    #[error("burst length {burst} exceeds sample count {samples}")]
    BurstTooLong { burst: usize, samples: usize },

    #[error("bisection did not converge after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },
    #[error("allocator called with the wrong mode: {0}")]
    InvalidMode(String),
    #[error("problem too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("restoration service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("bad response from service: {0}")]
    BadResponse(String),

    #[error("image too small for NIQE: {0}")]
    ImageTooSmall(String),
    #[error("pooled covariance is singular")]
    SingularPooledCovariance,
    #[error("too few patches to fit a pristine model: {0}")]
    TooFewPatches(usize),
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding has zero norm")]
    ZeroNormEmbedding,

    #[error("all coverage-gain inputs must be positive")]
    NonPositiveInput,

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
