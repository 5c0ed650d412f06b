use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("negative value {value:e} at cell {cell}")]
    NegativeValue { cell: usize, value: f64 },

    #[error("exponent must be finite here")]
    InfiniteExponent,

    #[error("non-finite {what} at x={x:?}, t={t}")]
    NonFiniteEvaluation { what: &'static str, x: [f64; 2], t: f64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("non-finite density at t={time}, cell {cell}")]
    NonFiniteState { time: f64, cell: usize },

    #[error(
        "support reached the {margin}-cell margin at t={time} (cell {cell}); enlarge the domain"
    )]
    MarginViolation { time: f64, cell: usize, margin: usize },

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("horizon shortfall: need t={needed}, trajectory ends at {available}")]
    HorizonShortfall { needed: f64, available: f64 },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("frontier too small: {cells} cells (need at least {min})")]
    FrontierTooSmall { cells: usize, min: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
