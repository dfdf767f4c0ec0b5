use thiserror::Error;

/// Errors reported by the quantization, allocation and precoding routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("argument out of range: {0}")]
    OutOfRange(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("requested {requested} modes but only {available} are available")]
    TooManyModes { requested: usize, available: usize },
    #[error("need at least {required} training samples, got {provided}")]
    TooFewSamples { required: usize, provided: usize },
    #[error("input vector is not unit norm (norm {0})")]
    NotUnitNorm(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid codebook: {0}")]
    InvalidCodebook(&'static str),
    #[error("trial count must be positive")]
    ZeroTrials,
    #[error("distortion values must be positive and finite")]
    NonPositiveDistortion,
}

pub type Result<T> = core::result::Result<T, Error>;
