use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: requested {requested}, budget {budget}")]
    Capacity { requested: usize, budget: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("precision loss: {0}")]
    Precision(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("table missing or too small: {0}")]
    MissingTable(String),

    #[error("inconsistent event {event} for state {state}")]
    InconsistentEvent { event: String, state: String },

    #[error("step budget of {0} exhausted")]
    Budget(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
