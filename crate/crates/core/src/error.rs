use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("infeasible contrast: {0}")]
    InfeasibleContrast(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Errors caused by the caller's input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_) | Error::InfeasibleContrast(_) | Error::Unavailable(_)
        )
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
