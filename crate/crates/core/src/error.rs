use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by matrix construction, scoring, fitting, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{kind} list must not be empty")]
    EmptyIdList { kind: &'static str },

    #[error("{kind} identifier {id:?} is invalid: {reason}")]
    BadId {
        kind: &'static str,
        id: String,
        reason: &'static str,
    },

    #[error("duplicate {kind} identifier {id:?}")]
    DuplicateId { kind: &'static str, id: String },

    #[error("expected {expected} cells, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{kind} index {index} out of range (len {len})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid cell value at ({row}, {col}): {reason}")]
    InvalidCell {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("score for user {user:?} is not finite")]
    NonFiniteScore { user: String },

    #[error("input {what} must not be empty")]
    EmptyInput { what: &'static str },

    #[error("cluster count must be at least 1")]
    ZeroClusters,

    #[error("values must be finite for clustering")]
    NonFiniteValue,

    #[error("need at least {required} users, got {actual}")]
    TooFewUsers { required: usize, actual: usize },

    #[error("{what} has zero variance; correlation undefined")]
    ZeroVariance { what: String },

    #[error("intrinsic score range is zero; normalization undefined")]
    DegenerateRange,

    #[error("damping factor {0} outside [0, 1)")]
    BadDamping(f64),

    #[error("group count {k} invalid for {users} users")]
    BadGroupCount { k: usize, users: usize },

    #[error("unknown model {0:?}")]
    UnknownModel(String),

    #[error("unknown item index {0}")]
    UnknownItem(usize),

    #[error("item {item} has no fitted threshold for level {level}")]
    UnknownLevel { item: usize, level: u8 },

    #[error("model {0} requires a social graph")]
    GraphRequired(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
