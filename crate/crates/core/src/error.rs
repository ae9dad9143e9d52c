use thiserror::Error;

/// Errors produced by model handling, mesh construction and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("edge ({i},{j}) has a non-submodular cost table")]
    NotSubmodular { i: usize, j: usize },

    #[error("{what} is too large: {size} exceeds cap {cap}")]
    TooLarge { what: &'static str, size: f64, cap: f64 },

    #[error("induced width {width} exceeds cap {cap}")]
    WidthExceeded { width: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
