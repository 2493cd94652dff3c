use thiserror::Error;

use crate::simulator::RunTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("division by zero: {0}")]
    Division(&'static str),

    /// A non-finite or exploding iterate. Carries the trace up to the failing step.
    #[error("run diverged at step {step}: {reason}")]
    Divergence {
        step: u64,
        reason: String,
        trace: Box<RunTrace>,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("missing recording: {0}")]
    MissingRecording(&'static str),

    /// Neither sign of the two-steps-back term reproduces the ghost residual.
    #[error("residual identity failed: relative error {err_minus:e} (minus) / {err_plus:e} (plus) exceeds {tolerance:e}")]
    IdentityFailure {
        err_minus: f64,
        err_plus: f64,
        tolerance: f64,
    },
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
