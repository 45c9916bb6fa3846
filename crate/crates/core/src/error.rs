use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed review record: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid vote pair [{helpful}, {total}]")]
    InvalidVotes { helpful: i64, total: i64 },

    #[error("missing required field `{0}`")]
    MissingField(String),

    #[error("helpfulness ratio is undefined for a review without votes")]
    UndefinedRatio,

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("dataset too small to split: {helpful} helpful / {unhelpful} unhelpful (need at least 10 per class)")]
    TooSmallToSplit { helpful: usize, unhelpful: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("trace does not match the forward pass: {0}")]
    Trace(String),

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("loss diverged at epoch {epoch}, batch {batch}: {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("evaluation split `{0}` is empty")]
    EmptySplit(String),

    #[error("category `{0}` missing from one of the reports")]
    MissingCategory(String),

    #[error("data hygiene violation: {0}")]
    Hygiene(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::InvalidVotes { .. } => "InvalidVotes",
            Error::MissingField(_) => "MissingField",
            Error::UndefinedRatio => "UndefinedRatio",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::TooSmallToSplit { .. } => "TooSmallToSplit",
            Error::Shape(_) => "ShapeError",
            Error::Index { .. } => "IndexError",
            Error::Numerical(_) => "NumericalError",
            Error::Alignment(_) => "AlignmentError",
            Error::Corrupt(_) => "CorruptTable",
            Error::EmptySequence => "EmptySequence",
            Error::Trace(_) => "TraceError",
            Error::DegenerateLabels => "DegenerateLabels",
            Error::Divergence { .. } => "DivergenceError",
            Error::EmptySplit(_) => "EmptySplit",
            Error::MissingCategory(_) => "MissingCategory",
            Error::Hygiene(_) => "HygieneError",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}
