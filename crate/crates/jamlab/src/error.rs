use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] jamlab_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Schema violation; `field` is the dotted path of the offending value.
    #[error("{origin}: invalid value at `{field}`: {message}")]
    Schema { origin: String, field: String, message: String },
    #[error("{0}: {1}")]
    Csv(PathBuf, csv::Error),
    #[error("{0}: bad dataset file: {1}")]
    DatasetFile(PathBuf, String),
    #[error("no data: {0}")]
    NoData(String),
    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),
    #[error("missing series: {0}")]
    MissingSeries(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
