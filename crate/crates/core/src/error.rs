use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite feature value at index {index}")]
    NonFiniteFeature { index: usize },

    #[error("empty feature vector")]
    EmptyFeatures,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Format { row: usize, message: String },

    #[error("invalid label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: &'static str },

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(&'static str),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {lhs} vs {rhs}")]
    Shape { lhs: String, rhs: String },

    #[error("dimension mismatch: model expects {expected} features, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("loss overflowed to a non-finite value; check that features are min-max normalized")]
    NonFiniteLoss,

    #[error("dataset has no labeled records")]
    NoLabeledRecords,

    #[error("label {0:?} is not a known class")]
    UnknownClass(String),

    #[error("model has no classes")]
    EmptyModel,

    #[error("no threshold for class index {0}")]
    MissingThreshold(usize),

    #[error("no ROC point reaches TRR >= {constraint}; best achievable is {max_trr}")]
    ConstraintUnreachable { constraint: f64, max_trr: f64 },

    #[error("ROC curve needs both positive and negative scores")]
    FallbackNeeded,

    #[error("validation set is empty")]
    EmptyValidation,

    #[error("class {class:?}: {source}")]
    InClass {
        class: String,
        #[source]
        source: Box<Error>,
    },

    #[error("record {id:?}: {source}")]
    InRecord {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_class(self, class: impl Into<String>) -> Self {
        Error::InClass {
            class: class.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn in_record(self, id: impl Into<String>) -> Self {
        Error::InRecord {
            id: id.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
