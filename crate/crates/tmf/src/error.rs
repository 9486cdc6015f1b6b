use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid basis truncation: {0}")]
    InvalidTruncation(String),

    #[error("poisson solve requires mean-zero input, got mean {mean:.3e} (norm {norm:.3e})")]
    NonZeroMean { mean: f64, norm: f64 },

    #[error("field is not solenoidal: relative divergence {rel:.3e}")]
    NotSolenoidal { rel: f64 },

    #[error("numerical blow-up at step {step} (t = {t:.6})")]
    BlowUp { step: usize, t: f64 },

    #[error("fixed-point iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid configuration key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("loop spacing violated: max spacing {max:.3e} exceeds refinement budget {budget:.3e}")]
    LoopSpacing { max: f64, budget: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
