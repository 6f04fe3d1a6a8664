use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline-wide error type. Every failure is an error value; nothing in
/// the library panics on bad input or silently substitutes defaults.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed an out-of-range or inconsistent argument.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A text input could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input violates a declared schema (unknown column, missing column,
    /// bad declaration).
    #[error("schema error: {0}")]
    Schema(String),

    /// A text cell has no code in the conversion codebook.
    #[error("no numeric code for label {label:?} of attribute {attribute:?}")]
    UnmappedLabel { attribute: String, label: String },

    /// Operation applied to data in the wrong state (for example
    /// resampling a table that still holds text cells).
    #[error("invalid state: {0}")]
    State(String),

    /// Value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Correlation is undefined because an input is constant.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// Data is degenerate for the requested operation (for example labels
    /// are all one class).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// A computation produced a non-finite number.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Array dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A structured artifact (model file, window container) is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// I/O failure tagged with the path involved.
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error class. Distinct classes get
    /// distinct codes so scripts can dispatch on them.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) => 2,
            Error::Parse { .. } => 3,
            Error::Schema(_) | Error::UnmappedLabel { .. } => 4,
            Error::State(_)
            | Error::Domain(_)
            | Error::UndefinedCorrelation(_)
            | Error::Degenerate(_)
            | Error::Shape(_) => 5,
            Error::Numeric(_) => 6,
            Error::File { .. } | Error::Io(_) => 7,
            Error::Format(_) => 8,
        }
    }

    /// Attach a path to a bare I/O error.
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
