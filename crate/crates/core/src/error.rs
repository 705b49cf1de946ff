use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("numeric domain error for term {term:?}: {message}")]
    NumericDomain { term: String, message: String },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unparseable completion: {0}")]
    Unparseable(String),

    #[error("prompt budget exceeded: query needs {needed} tokens, budget is {budget}")]
    Budget { needed: usize, budget: usize },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("endpoint error: {0}")]
    Endpoint(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad inputs or configuration, as opposed to failures
    /// while computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Config(_)
                | Error::Format(_)
                | Error::MissingFile(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
