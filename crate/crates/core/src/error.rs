use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid {field}{}: {reason}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    Validation {
        field: String,
        index: Option<usize>,
        reason: String,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("refusing to enumerate {j}! permutations (cap is {cap}); raise the cap or use sampled mode")]
    EnumerationCap { j: usize, cap: usize },

    #[error("oracle enumeration too large: {0}")]
    OracleTooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, index: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            index,
            reason: reason.into(),
        }
    }
}
