use std::io;
use std::path::PathBuf;

use snipex_core::stats::StatsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: header is missing column {column:?}", path.display())]
    MissingColumn { path: PathBuf, column: String },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{}:{line}: {source}", path.display())]
    JsonLine {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// The sandbox could not set up or clean its working directory.
    #[error("sandbox environment: {0}")]
    Environment(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("store: {0}")]
    Store(String),

    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),

    #[error("http: {0}")]
    Http(String),

    #[error("{0}")]
    Stats(StatsError),

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<StatsError> for Error {
    fn from(e: StatsError) -> Self {
        Error::Stats(e)
    }
}
