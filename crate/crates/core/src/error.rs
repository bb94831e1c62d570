//! Shared error type for all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model/parameter configuration (dimension mismatch, invariant
    /// violation, unknown names). Detected before any computation runs.
    #[error("configuration error: {0}")]
    Config(String),

    /// Numerical failure during computation (singular matrix,
    /// non-convergence). Carries a diagnostic such as a condition estimate
    /// or final residual.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Observed data is impossible under the model.
    #[error("inconsistent data at step {step}: {what}")]
    Inconsistent { step: usize, what: String },

    /// Particle weight collapse.
    #[error("particle degeneracy at step {step}: effective sample size {ess:.3}")]
    Degeneracy { step: usize, ess: f64 },

    /// Protocol violation in a multi-agent experiment (e.g. zero gain).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Data unsuitable for the requested analysis (e.g. nonpositive values
    /// on a log-log fit range).
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
