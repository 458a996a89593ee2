use std::path::PathBuf;

use crate::model::ChannelId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("dimension mismatch: expected width {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("k exceeds training size (k = {k}, training samples = {train})")]
    KTooLarge { k: usize, train: usize },

    #[error("k must be at least 1")]
    KZero,

    #[error("degenerate split ratios {0:?}: ratios must be positive and sum to 1")]
    DegenerateRatios([f64; 3]),

    #[error("split needs at least 3 samples, got {0}")]
    TooFewSamples(usize),

    #[error("unknown channel {0}")]
    UnknownChannel(ChannelId),

    #[error("duplicate channel {0}")]
    DuplicateChannel(ChannelId),

    #[error("invalid precision table: {0}")]
    InvalidPrecisionTable(String),

    #[error("no channels left to rank: {channels} channels for {tasks} tasks")]
    NotEnoughChannels { channels: usize, tasks: usize },

    #[error("inconsistent ranking sets: {0}")]
    InconsistentRankings(String),

    #[error("invalid DAG: {0}")]
    InvalidDag(String),

    #[error("no confidence model for subset {0}")]
    MissingModel(String),

    #[error("missing reading for channel {0}")]
    MissingReading(ChannelId),

    #[error("threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),

    #[error("invalid model registry: {0}")]
    InvalidRegistry(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
