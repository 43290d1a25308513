use thiserror::Error;

/// Every failure the solvers can report.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain (zero divisor, `c < 2`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Instance data that violates a type invariant.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// Some `u_k` rounded down to zero; a larger resolution is required.
    #[error("quantization underflow at indices {indices:?} (N = {big_n}); raise c or N")]
    QuantizationUnderflow { indices: Vec<usize>, big_n: String },

    /// A configured cap (table cells, oracle size, grid leaves) would be exceeded.
    #[error("resource limit exceeded: {what} needs {required}, cap is {cap}")]
    Resource {
        what: String,
        required: String,
        cap: String,
    },

    /// Malformed JSON text.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Well-formed JSON with a missing or bad field.
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Field {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn resource(
        what: impl Into<String>,
        required: impl ToString,
        cap: impl ToString,
    ) -> Self {
        Error::Resource {
            what: what.into(),
            required: required.to_string(),
            cap: cap.to_string(),
        }
    }

    /// True for cap/budget failures, which the CLI maps to its own exit code.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
