use thiserror::Error;

/// Errors produced anywhere in the simulator and learning stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {message}")]
    Numeric {
        message: String,
        /// Free-form diagnostic context (batch statistics, offending values).
        diagnostic: Option<String>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn numeric(message: impl Into<String>) -> Self {
        Error::Numeric {
            message: message.into(),
            diagnostic: None,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable tag, used for the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::Domain(_) => "domain",
            Error::Numeric { .. } => "numeric",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serialization",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
