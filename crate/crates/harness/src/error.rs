use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 1 usage, 2 configuration or I/O, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Config(_) | Self::Io(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

impl From<darap_core::Error> for HarnessError {
    fn from(e: darap_core::Error) -> Self {
        match e {
            darap_core::Error::Numeric(m) => Self::Numeric(m),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
