use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid sizes, parameters, or configuration values. `path` names the
    /// offending setting (a config path such as `physics.gamma`, or an argument name).
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("numerical conditioning error: {0}")]
    Conditioning(String),

    #[error("blow-up at t = {t}: {detail}")]
    BlowUp { t: f64, detail: String },

    #[error("ensemble failure: all {paths} paths blew up")]
    EnsembleFailure { paths: usize },

    #[error("basis cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
