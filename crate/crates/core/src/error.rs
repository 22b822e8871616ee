use std::path::PathBuf;

use thiserror::Error;

use crate::timeseries::MonthStamp;

#[derive(Debug, Error)]
pub enum Error {
    #[error("panels share no common dates")]
    NoOverlap,
    #[error("series `{series}` has a gap or interior missing value at {at}")]
    GapInSeries { series: String, at: MonthStamp },
    #[error("series `{0}` not found")]
    MissingSeries(String),
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("line {line}: row has {got} values, header has {expected}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("no monthly section found")]
    NoMonthlySection,
    #[error("could not fetch {dataset}: {detail}")]
    FetchFailed { dataset: String, detail: String },
    #[error("dataset {dataset} failed sanity checks: {detail}")]
    CorruptDataset { dataset: String, detail: String },
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("system is singular or not positive definite: {0}")]
    Singular(String),
    #[error("no grid point produced a finite likelihood")]
    SelectionFailed,
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("bootstrap replicate {index} failed: {source}")]
    ReplicateFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::ConfigError(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
