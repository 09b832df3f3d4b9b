use std::fmt;

/// Matrix shape as `(rows, cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape(pub usize, pub usize);

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("length mismatch in {op}: expected {expected}, got {actual}")]
    LengthMismatch {
        op: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: value {value} outside {bound}")]
    OutOfBounds {
        row: usize,
        column: String,
        value: f64,
        bound: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema: {0}")]
    Schema(String),

    #[error("model file checksum mismatch (file is truncated or corrupted)")]
    Checksum,

    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("{features} features exceed the exact Shapley limit of {limit}; use kernel SHAP instead")]
    ExactLimit { features: usize, limit: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
