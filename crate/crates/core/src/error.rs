use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: malformed record: {message}")]
    MalformedRecord {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("invalid project id {0:?}: expected owner/name")]
    InvalidProjectId(String),

    #[error("unknown project {0}")]
    UnknownProject(String),

    #[error("store at {path} is unreadable: {message}")]
    UnreadableStore { path: PathBuf, message: String },

    /// Retriable failure from the GitHub API.
    #[error("rate limited or unavailable; retry after {retry_after:?}: {message}")]
    Retriable {
        retry_after: Duration,
        message: String,
    },

    #[error("api error: {0}")]
    Api(String),

    #[error("undefined divergence: P has mass where Q is zero (index {index})")]
    UndefinedDivergence { index: usize },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("undefined for inactive subject (zero total)")]
    InactiveSubject,

    #[error("insufficient history for {project}: {message}")]
    InsufficientHistory { project: String, message: String },

    #[error("invalid design matrix: {0}")]
    InvalidDesign(String),

    #[error("perfect separation detected on column {column}")]
    PerfectSeparation { column: String },

    #[error("rank deficient information matrix")]
    RankDeficient,

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("schema mismatch, missing columns: {}", missing.join(", "))]
    SchemaMismatch { missing: Vec<String> },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid window {0:?}")]
    InvalidWindow(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Retriable { .. })
    }
}
