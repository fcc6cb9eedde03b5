use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("assignment matrix has {cols} columns but only {rows} rows")]
    TooManyColumns { rows: usize, cols: usize },

    #[error("non-finite entry in cost matrix at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
