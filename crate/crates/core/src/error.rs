use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("enumeration budget exceeded: {needed} subsets requested, budget {budget}")]
    Budget { needed: u128, budget: u128 },

    #[error("infeasible: {reason}")]
    Infeasible { reason: String, attainable: Option<f64> },

    #[error("columns fail to determine sparse vectors uniquely: {0}")]
    NotUniquelyDetermined(String),

    #[error("root finder failed: {0}")]
    Root(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
