use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid span [{start}, {end}) for a stream of {len} tokens")]
    InvalidSpan { start: usize, end: usize, len: usize },

    #[error("spans [{0}, {1}) and [{2}, {3}) overlap")]
    OverlappingSpans(usize, usize, usize, usize),

    #[error("scheme mismatch: expected {expected}, found {found}")]
    SchemeMismatch { expected: String, found: String },

    #[error("token id {id} at position {position} is out of range for a vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, position: usize, vocab_size: u32 },

    #[error("window of {window} tokens does not fit a stream of {len} tokens")]
    DegenerateInput { window: usize, len: usize },

    #[error("infeasible segment packing: {0}")]
    InfeasiblePacking(String),

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("length mismatch: {results} results vs {labels} labels")]
    LengthMismatch { results: usize, labels: usize },

    #[error("document join failed: {0}")]
    Join(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
