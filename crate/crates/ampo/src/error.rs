/// A command failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad flags or unreadable configuration, data or scripts (exit 2).
    #[error("{0}")]
    Config(String),
    /// Failures while running (exit 1).
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Runtime(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl std::fmt::Display) -> Error {
    Error::Config(msg.to_string())
}

pub(crate) fn runtime(msg: impl std::fmt::Display) -> Error {
    Error::Runtime(msg.to_string())
}
