use thiserror::Error;

/// Errors raised across the training stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, range, arity).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A NaN or infinity showed up where only finite values are allowed.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// The finite-difference oracle could not evaluate the loss.
    #[error("finite-difference oracle failed: {0}")]
    Oracle(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
