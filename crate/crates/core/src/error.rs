use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line count mismatch: {texts} texts vs {labels} labels")]
    LineCountMismatch { texts: usize, labels: usize },
    #[error("label {label} out of range for {num_classes} classes (line {line})")]
    LabelOutOfRange {
        label: i64,
        num_classes: usize,
        line: usize,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("class {class} has {count} examples, fewer than the {splits} splits")]
    ClassTooSmall {
        class: usize,
        count: usize,
        splits: usize,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty input string")]
    EmptyString,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {left} predictions vs {right} golds")]
    LengthMismatch { left: usize, right: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("class {0} has zero count")]
    ZeroCountClass(usize),
    #[error("training diverged: non-finite loss at epoch {0}")]
    Diverged(usize),
    #[error("empty token sequence")]
    EmptySequence,
    #[error("token id {id} out of range for vocabulary of {size}")]
    TokenIdOutOfRange { id: usize, size: usize },
    #[error(transparent)]
    Tensor(#[from] emopred_tensor::TensorError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}
