use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chain specification: {0}")]
    InvalidSpec(String),

    #[error("occupation probabilities out of range: {0}")]
    ProbabilityDomain(String),

    #[error("invalid expansion order {0}: orders start at 1")]
    InvalidOrder(usize),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("numerical failure in {context} (error estimate {estimate:e})")]
    NumericalFailure { context: String, estimate: f64 },

    #[error("basis dimension {dim} exceeds the configured cap {cap}")]
    Capacity { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("self-consistency not reached after {iterations} iterations (last residual {:e})", .residuals.last().copied().unwrap_or(f64::NAN))]
    Convergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("no expansion order up to {max_order} is monotone (best order {best_order} with {violations} violations)")]
    OrderNotFound {
        max_order: usize,
        best_order: usize,
        violations: usize,
    },

    #[error("ensemble sample {index} (seed {seed}) failed: {source}")]
    SampleFailed {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn numerical(context: impl Into<String>, estimate: f64) -> Self {
        Error::NumericalFailure {
            context: context.into(),
            estimate,
        }
    }

    /// True for errors caused by the caller's parameters rather than by the numerics.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            Error::InvalidSpec(_)
            | Error::InvalidOrder(_)
            | Error::UnsupportedRegime(_)
            | Error::DimensionMismatch { .. } => true,
            Error::SampleFailed { source, .. } => source.is_invalid_input(),
            _ => false,
        }
    }
}
