use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sensor unit `{unit_id}` has no samples")]
    EmptyStream { unit_id: String },

    #[error("sensor unit `{unit_id}`: timestamps not strictly increasing at sample {index}")]
    NonMonotonicTimestamps { unit_id: String, index: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("intervals overlap: `{first}` and `{second}`")]
    OverlappingIntervals { first: String, second: String },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("signal too short: {n} samples, at least {required} required")]
    SignalTooShort { n: usize, required: usize },

    #[error("input size {n} exceeds limit {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("attribute count mismatch: schema has {expected}, got {found}")]
    AttributeCount { expected: usize, found: usize },

    #[error("attribute `{attribute}`: value {value} outside 0..{arity}")]
    AttributeValue {
        attribute: String,
        value: i64,
        arity: u8,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("schema mismatch: model schema hash {found:016x}, expected {expected:016x}")]
    SchemaMismatch { expected: u64, found: u64 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("model file version {found} unsupported (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },

    #[error("model file checksum mismatch")]
    ChecksumMismatch,

    #[error("no atomic activities under T = {threshold_s} s")]
    NoAtomicActivities { threshold_s: f64 },

    #[error("interval mismatch: {0}")]
    IntervalMismatch(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{op} {path}: {source}")]
    Io {
        op: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("network: {0}")]
    Network(String),
}

impl Error {
    pub(crate) fn io(op: &'static str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            op,
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the caller's inputs (bad files, bad
    /// parameters), false for failures of the environment or the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { op, source, .. } => {
                *op == "read" && source.kind() == std::io::ErrorKind::NotFound
            }
            Error::Network(_) | Error::Numerical(_) => false,
            _ => true,
        }
    }
}
