use thiserror::Error;

/// Errors produced by samplers, codecs and validators.
#[derive(Debug, Error)]
pub enum BgError {
    /// An argument is outside the documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exhaustive enumeration was requested above the guarded size.
    #[error("size limit exceeded: {what} = {got}, maximum {max}")]
    SizeLimit {
        what: &'static str,
        got: usize,
        max: usize,
    },

    /// A structural invariant of a tree, map or snake does not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Malformed serialized input.
    #[error("decode error: {0}")]
    Decode(String),

    /// Too little data to run a statistical fit.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BgError>;

impl BgError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        BgError::InvalidArgument(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        BgError::Invariant(msg.into())
    }
}
