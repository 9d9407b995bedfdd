use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] meta4diag_core::Error),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Whether the failure stems from user input rather than computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Core(e) => e.is_validation(),
            Error::Input(_) | Error::Json(_) => true,
            Error::Io(_) => false,
        }
    }

    /// Process exit status: 2 for invalid input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            1
        }
    }
}
