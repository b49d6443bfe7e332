use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fixed-point overflow: |{value}| must be below 2^{limit_bits}")]
    FixedPointOverflow { value: f64, limit_bits: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty matrix: decomposition needs at least one non-zero entry")]
    EmptyMatrix,

    #[error("matrix is not {kind}-type: {reason}")]
    NotStructured { kind: &'static str, reason: String },

    #[error("invalid permutation: {0}")]
    Permutation(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("randomness tape exhausted (requested {0})")]
    TapeExhausted(String),

    #[error("randomness tape mismatch: expected {expected}, found {found}")]
    TapeMismatch { expected: String, found: String },

    #[error("deadlock: both parties are blocked on receive")]
    Deadlock,

    #[error("peer party terminated before sending the expected message")]
    PeerClosed,

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("party {party} panicked")]
    PartyPanicked { party: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
