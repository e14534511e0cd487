use thiserror::Error;

pub type Result<T> = std::result::Result<T, MidError>;

#[derive(Debug, Error)]
pub enum MidError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing value at row {row} (column '{column}')")]
    MissingValue { row: usize, column: String },

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("column '{0}' not found")]
    UnknownColumn(String),

    #[error("column '{column}' is not numeric (row {row}: '{value}')")]
    NotNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("unknown level '{level}' for feature '{feature}'")]
    UnknownLevel { feature: String, level: String },

    #[error("unknown term '{0}'")]
    UnknownTerm(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("wrong arity for '{name}': expected {expected} columns, found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("unsupported model file version {found} (this build reads version {supported})")]
    Version { found: u32, supported: u32 },
}

impl MidError {
    /// Coarse classification used by the command-line front end for exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            MidError::InvalidArgument(_) => ErrorCategory::Usage,
            MidError::Numerical(_) => ErrorCategory::Numerical,
            _ => ErrorCategory::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}
