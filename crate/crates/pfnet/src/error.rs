//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad spec fields, infeasible corpus, unknown enum value).
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor or layer shape disagreement.
    #[error("shape error: {0}")]
    Shape(String),

    /// An operation precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A domain-type invariant does not hold on the given value.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Malformed external file; `field` names the offending header field or record.
    #[error("format error in {field}: {detail}")]
    Format { field: String, detail: String },

    /// Label or trial data outside the valid range.
    #[error("data error: {0}")]
    Data(String),

    /// Backward called against a cache that no longer matches the parameters.
    #[error("cache invalidated: parameters changed since the cached forward pass")]
    StaleCache,

    /// Forward/backward cache is missing entirely.
    #[error("no cached forward pass available for backward")]
    MissingCache,

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn format(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            detail: detail.into(),
        }
    }
}
