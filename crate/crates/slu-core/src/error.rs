use thiserror::Error;

#[derive(Debug, Error)]
pub enum SluError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite update for parameter '{0}'")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("no template covers act pattern: {0}")]
    UncoveredAct(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
