use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: expected {expected} tab-separated columns, found {found}")]
    MalformedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {reason}")]
    InvalidRecord { line: usize, reason: &'static str },
    #[error("dataset has no header line")]
    MissingHeader,
    #[error("dataset is missing the label column")]
    MissingLabels,
    #[error("corpus is unlabeled")]
    Unlabeled,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tensor values must be finite")]
    NonFinite,
    #[error("target class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("every attention key is masked")]
    AllKeysMasked,
    #[error("sequence is empty after padding")]
    EmptySequence,
    #[error("no documents to build a vocabulary from")]
    EmptyCorpus,
    #[error("training data is empty")]
    EmptyData,
    #[error("training data contains only `{0}` examples")]
    SingleClass(crate::Label),
    #[error("embedding line {line}: expected {expected} components, found {found}")]
    EmbeddingDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding line {line}: `{value}` is not a number")]
    EmbeddingValue { line: usize, value: String },
    #[error("embedding dimension unknown for an empty table")]
    EmbeddingDimensionUnknown,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("feature dimension mismatch: model expects {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("training diverged (non-finite loss)")]
    Diverged,
}

pub type Result<T> = core::result::Result<T, Error>;
