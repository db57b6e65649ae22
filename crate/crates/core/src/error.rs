//! Error type shared by every module in the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the toolkit.
///
/// `InvalidInput` means the caller handed in something outside the
/// documented domain (a misconfigured model, a head start at or above the
/// threshold, an empty run budget). `Numeric` means the inputs were legal
/// but a computation could not be completed to its accuracy contract (an
/// ill-conditioned Nystrom matrix, a power iteration that did not converge,
/// a degenerate survival probability).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// An argument or configuration value is outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A numeric routine failed to meet its accuracy or convergence contract.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Builds an [`Error::InvalidInput`] from anything displayable.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Builds an [`Error::Numeric`] from anything displayable.
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
