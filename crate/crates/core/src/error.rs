use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game spec: {0}")]
    InvalidSpec(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("grid too coarse for the explicit scheme: {0}")]
    SchemeUnstable(String),
    #[error("truncation tail {tail:.3e} exceeds the requested tolerance {tol:.3e}; increase t_end")]
    TailTooLarge { tail: f64, tol: f64 },
    #[error("instance too large for enumeration: {0} candidate strategies (limit 1e6)")]
    TooLarge(u128),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
