use thiserror::Error;

/// Errors surfaced by construction and evaluation routines.
#[derive(Debug, Error)]
pub enum TradeError {
    #[error("invalid valuation: {0}")]
    InvalidValuation(String),

    #[error("invalid marginal profile: {0}")]
    InvalidMarginals(String),

    #[error("invalid gadget parameters: {0}")]
    InvalidGadget(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    #[error("instance error at {path}: {message}")]
    Instance { path: String, message: String },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("price solver failed: {0}")]
    SolverFailure(String),

    #[error("schema error: {0}")]
    Schema(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TradeError>;
