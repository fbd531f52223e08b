use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid group descriptor `{0}`: {1}")]
    GroupDescriptor(String, String),
    #[error("invalid element: {0}")]
    Element(String),
    #[error("invalid tuple: {0}")]
    Tuple(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("enumeration inconsistency: {0}")]
    Inconsistent(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
