use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("integration exceeded {max_steps} steps at t = {t}")]
    StepLimitExceeded { t: f64, max_steps: usize },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("transform requires strictly positive input, got {value} (row {row}, column {col})")]
    NonPositiveInput { value: f64, row: usize, col: usize },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("all optimizer starts failed{}", match .index { Some(i) => format!(" (leave-one-out index {i})"), None => String::new() })]
    AllStartsFailed { index: Option<usize> },

    #[error("empty sample")]
    EmptySample,

    #[error("jackknife+ requires a univariate observable, got n_y = {0}")]
    NotUnivariate(usize),

    #[error("evaluation grid does not match the region grid: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::UnknownModel(_)
                | Error::InvalidConfig(_)
                | Error::InvalidGrid(_)
                | Error::Parse { .. }
                | Error::DimensionMismatch(_)
                | Error::InvalidDataset(_)
                | Error::NotUnivariate(_)
                | Error::NonPositiveInput { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
