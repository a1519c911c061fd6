use std::path::PathBuf;

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

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown retrieval method tag `{0}`")]
    UnknownRetrievalMethod(String),

    #[error("unknown schema adapter `{0}`")]
    UnknownAdapter(String),

    #[error("triple {id}: {labels} sentence labels for {sentences} answer sentences")]
    LabelLengthMismatch {
        id: String,
        labels: usize,
        sentences: usize,
    },

    #[error("triple {0} has no gold example label")]
    MissingGoldLabel(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("non-finite value in embedding vector")]
    NonFinite,

    #[error("embedding cache miss in replay mode for {0} text(s)")]
    EmbeddingCacheMiss(usize),

    #[error("chat cache miss in replay mode (key {0})")]
    ChatCacheMiss(String),

    #[error("no provider configured: {0}")]
    NoProvider(&'static str),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("cache {path} belongs to provider `{found}`, expected `{expected}`")]
    CacheIdentity {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("context has {0} sentences; the limit is 40")]
    ContextTooLong(usize),

    #[error("invalid threshold {name} = {value}: must lie in [0, 1]")]
    InvalidThreshold { name: &'static str, value: f64 },

    #[error("dense retrieval is disabled for this index")]
    DenseDisabled,

    #[error("unparseable manual: {0}")]
    Manual(String),

    #[error("no keywords supplied for triple `{0}`")]
    MissingKeywords(String),

    #[error("index format: {0}")]
    IndexFormat(String),

    #[error("undefined statistic: {0}")]
    Undefined(&'static str),

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
}
