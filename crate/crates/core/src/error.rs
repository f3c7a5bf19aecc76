use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension { what: &'static str, expected: usize, found: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not a probability vector: {0}")]
    Simplex(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension { what, expected, found }
    }
}
