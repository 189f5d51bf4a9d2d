use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum HblError {
    #[error("domain error: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("matrix is not numerically positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("sampler failed at iteration {iteration} during {step}: {source}")]
    Sampler {
        step: &'static str,
        iteration: usize,
        #[source]
        source: Box<HblError>,
    },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("column '{0}' has zero variance")]
    ZeroVariance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown simulation model {0} (expected 1-4)")]
    UnknownModel(u8),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HblError>;

/// Returns `Ok(value)` when `value` is finite and strictly positive.
pub(crate) fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(HblError::Domain { what, value })
    }
}

impl HblError {
    pub(crate) fn at(self, step: &'static str, iteration: usize) -> HblError {
        HblError::Sampler {
            step,
            iteration,
            source: Box::new(self),
        }
    }
}
