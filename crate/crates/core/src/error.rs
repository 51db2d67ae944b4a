use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Provider,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
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

    #[error("duplicate frame label {0:?}")]
    DuplicateLabel(String),

    #[error("duplicate id {id:?} in {source_name}")]
    DuplicateId { id: String, source_name: String },

    #[error("unknown frame label {label:?}{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    UnknownLabel {
        label: String,
        context: Option<String>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value at position {position} of embedding {index}")]
    NonFinite { index: usize, position: usize },

    #[error("embedding failed for frame {label:?}: {source}")]
    FrameEmbedding {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("index format: {0}")]
    IndexFormat(String),

    #[error("unsupported index format version {found} (expected {expected})")]
    IndexVersion { found: u32, expected: u32 },

    #[error("index checksum mismatch")]
    IndexChecksum,

    #[error("index file truncated: expected {expected} body bytes, found {found}")]
    IndexTruncated { expected: u64, found: u64 },

    #[error("prompt needs ~{estimated} tokens, budget is {budget}")]
    BudgetExceeded { estimated: usize, budget: usize },

    #[error("id sets differ: {0}")]
    IdMismatch(String),

    #[error("missing reformulation for question {0:?}")]
    MissingReformulation(String),

    #[error("transport: {0}")]
    Transport(String),

    #[error("provider response: {0}")]
    ProviderResponse(String),

    #[error("environment variable {0} is not set")]
    MissingSecret(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Transport(_)
            | Error::ProviderResponse(_)
            | Error::MissingSecret(_)
            | Error::NonFinite { .. } => ErrorKind::Provider,
            Error::DimensionMismatch { .. } => ErrorKind::Data,
            Error::FrameEmbedding { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    /// Transport-level failures are worth retrying; malformed responses are not.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_))
    }
}
