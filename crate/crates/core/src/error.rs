use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("optimization failed to converge after {iterations} iterations (gradient norm {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error(
        "problem generation failed after {draws} draws \
         (positivity rejections: {positivity}, trade-off rejections: {tradeoff}; most frequent: {dominant})"
    )]
    GenerationFailed {
        draws: usize,
        positivity: usize,
        tradeoff: usize,
        dominant: &'static str,
    },

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("step {step}: {source}")]
    Step {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: u64) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite values")))
    }
}
