use thiserror::Error;

#[derive(Debug, Error)]
pub enum SlfvError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("simulation horizon {horizon} exhausted at t = {time}")]
    HorizonExhausted { time: f64, horizon: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsorted input: {0}")]
    Unsorted(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SlfvError>;

pub(crate) fn invalid(msg: impl Into<String>) -> SlfvError {
    SlfvError::InvalidParameter(msg.into())
}
