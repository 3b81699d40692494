use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] socop_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for bad input data, 3 for bad configuration.
    pub fn exit_code(&self) -> i32 {
        use socop_core::Error as C;
        match self {
            Error::Config(_) => 3,
            Error::Core(
                C::InvalidLambda(_)
                | C::InvalidK0 { .. }
                | C::InvalidAlpha(_)
                | C::InvalidGrid(_)
                | C::TooFewPoints { .. },
            ) => 3,
            _ => 2,
        }
    }

    pub fn io_path(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
