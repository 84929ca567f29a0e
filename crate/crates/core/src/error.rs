use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid model definition: {0}")]
    ModelDefinition(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("solver failed: {0}")]
    Solver(String),

    /// The reduced step matrix could not be factorized. The schemes guarantee a
    /// positive definite matrix, so this is an internal invariant violation.
    #[error("step system not solvable: {0}")]
    Solvability(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Argument(_) | Error::ModelDefinition(_) => 2,
            Error::Numeric(_) | Error::Solver(_) | Error::Solvability(_) | Error::Dimension(_) => 3,
            Error::Format(_) | Error::Io(_) => 4,
        }
    }
}
