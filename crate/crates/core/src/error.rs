use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("gradient tape does not belong to the current network parameters")]
    StaleTape,
    #[error("training diverged at step {step}: {what}")]
    Divergence { step: u64, what: String },
    #[error("need at least {needed} recorded values, got {got}")]
    InsufficientWindow { needed: usize, got: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("rejection sampler starved: acceptance rate {rate:.2e} over the last {window} candidates")]
    Starvation { rate: f64, window: usize },
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    Optimization { iterations: usize, grad_norm: f64 },
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
