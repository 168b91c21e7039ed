use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("gap undefined on this ball")]
    GapUndefined,
    #[error("no scales to scan")]
    NoScales,
    #[error("ball contains no points of the cloud")]
    EmptyBall,
    #[error("tau_too_large: tau = {tau} must satisfy 1/tau > 2*sqrt(n)/eta (tau < {max})")]
    TauTooLarge { tau: f64, max: f64 },
    #[error(
        "incompatible scales: smallest related dyadic size {related} must exceed the leaf size {leaf} (increase m or decrease k0)"
    )]
    IncompatibleScales { related: f64, leaf: f64 },
    #[error("unknown cube {0}")]
    UnknownCube(String),
    #[error("hard invariant failed: {0}")]
    InvariantFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
