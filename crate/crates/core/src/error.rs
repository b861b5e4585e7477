use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cutpoint grid: {0}")]
    Grid(String),

    #[error("invalid tree: {0}")]
    Tree(String),

    #[error("malformed tree serialization at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid hyperparameters: {0}")]
    Hyper(String),

    #[error("invalid run configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{path}: row {row}, column {col}: {msg}")]
    Csv {
        path: String,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    File { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
