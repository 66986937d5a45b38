use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A corpus or forecast line could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A record parsed but violates a data invariant.
    #[error("sample '{id}': invalid field '{field}': {message}")]
    Validation {
        id: String,
        field: String,
        message: String,
    },

    #[error("config line {line}: unknown key '{key}'")]
    UnknownConfigKey { line: usize, key: String },

    #[error("config key '{key}': {message}")]
    ConfigValue { key: String, message: String },

    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request is valid but cannot be served by the chosen method.
    #[error("unsupported: {0}")]
    Capability(String),

    #[error("linear solver: {0}")]
    Solver(String),

    #[error("non-finite activation in {layer}")]
    NonFinite { layer: String },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(id: &str, field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            id: id.to_string(),
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::ConfigValue {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
