use thiserror::Error;

#[derive(Debug, Error)]
pub enum PedantsError {
    #[error("reference list is empty")]
    EmptyReferences,

    #[error("cannot fit a vectorizer on an empty corpus")]
    EmptyCorpus,

    #[error("inconsistent feature dimensions: expected {expected}, found {found}")]
    InconsistentDimensions { expected: usize, found: usize },

    #[error("feature dimension mismatch: model expects {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training data contains fewer than two distinct classes")]
    SingleClassCorpus,

    #[error("label {label} out of range for a {classes}-class model")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),

    #[error("training records missing annotations: {}", format_missing(.0))]
    MissingAnnotations(Vec<MissingAnnotation>),

    #[error("no records to evaluate")]
    EmptyRecords,

    #[error("ranking needs at least two models, got {0}")]
    TooFewModels(usize),

    #[error("model {model:?} has no rate for {source_name:?}")]
    MissingRate { model: String, source_name: String },

    #[error("rate {value} for model {model:?} is outside [0, 1]")]
    RateOutOfRange { model: String, value: f64 },

    #[error("threshold {0} is outside [0, 1]")]
    ThresholdOutOfRange(f64),

    #[error("no thresholds given")]
    EmptyThresholds,

    #[error("Likert score {score} outside 1..=5")]
    OutOfRangeScore { score: i64 },

    #[error("unknown normalization preset {0:?}")]
    UnknownPreset(String),

    #[error("unknown rule label {0:?}")]
    UnknownRule(String),

    #[error("unknown question type {0:?}")]
    UnknownQuestionType(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One training record that lacks a field required for training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingAnnotation {
    pub index: usize,
    pub fields: Vec<&'static str>,
}

fn format_missing(records: &[MissingAnnotation]) -> String {
    records
        .iter()
        .map(|m| format!("#{} ({})", m.index, m.fields.join(", ")))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = PedantsError> = std::result::Result<T, E>;
