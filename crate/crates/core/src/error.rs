use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A residual or orthogonality check exceeded its tolerance.
    #[error("numerical contract violated: {0}")]
    Numerical(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("malformed feature container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
