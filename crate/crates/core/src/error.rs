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

    #[error("io: {0}")]
    Stream(#[from] std::io::Error),

    #[error("line {line}: cannot parse {value:?} as a float")]
    ParseFloat { line: usize, value: String },

    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: duplicate word {word:?}")]
    DuplicateWord { line: usize, word: String },

    #[error("no token of the sequence is in the embedding vocabulary")]
    EmptySequence,

    #[error("row {row}: {message}")]
    Manifest { row: usize, message: String },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("tensor contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("batch normalization in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("sequence {0} has no unmasked step")]
    EmptyMask(usize),

    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no negative class available for artwork {0:?}")]
    NoNegatives(String),

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("no ground truth for artwork {0:?}")]
    MissingTruth(String),

    #[error("metrics csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the environment (files, streams) rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Stream(_))
    }
}
