use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the `erdf` library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },

    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("entries sum to {sum}, outside the normalization tolerance")]
    SumOutOfTolerance { sum: f64 },

    #[error("a label distribution needs at least 2 entries, got {len}")]
    TooFewLabels { len: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("feature dimension mismatch: expected {expected} columns, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("too few samples: need at least {required}, found {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("k_neighbors = {k} exceeds the {n} available training rows")]
    KTooLarge { k: usize, n: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid label distribution in data row {row}: {reason}")]
    InvalidDistribution { row: usize, reason: String },

    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

impl Error {
    /// Short category name, stable across releases. The CLI prints it in
    /// front of every error message.
    pub fn category(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "NonFinite",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::SumOutOfTolerance { .. } => "SumOutOfTolerance",
            Error::TooFewLabels { .. } => "TooFewLabels",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::Io { .. } => "IoError",
            Error::Parse { .. } => "ParseError",
            Error::Schema(_) => "SchemaError",
            Error::InvalidDistribution { .. } => "InvalidDistribution",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::CorruptModel(_) => "CorruptModel",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
