use thiserror::Error;

/// Domain errors raised by the numeric types and loss functions.
#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("prototype row {row} has zero norm")]
    ZeroNormPrototype { row: usize },

    #[error("embedding vector has zero norm")]
    ZeroNormEmbedding,

    #[error("need at least {min} classes, found {found}")]
    TooFewClasses { min: usize, found: usize },

    #[error("matrix must be non-empty, found {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("temperature must be positive and finite, found {value}")]
    InvalidTemperature { value: f64 },

    #[error("mixing weight alpha must lie in [0, 1], found {value}")]
    InvalidAlpha { value: f64 },

    #[error("class label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("row {row} of probability matrix sums to {sum}, expected 1")]
    RowNotNormalized { row: usize, sum: f64 },

    #[error("probability entry at row {row}, column {col} is {value}, expected (0, 1)")]
    ProbabilityOutOfRange { row: usize, col: usize, value: f64 },

    #[error("empty batch")]
    EmptyBatch,
}
