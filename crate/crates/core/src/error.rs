use std::fmt;

use thiserror::Error;

/// Position inside a text document, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("matrix is singular (zero pivot at column {column})")]
    SingularMatrix { column: usize },

    #[error("remainder order {0} is not supported (catalog provides orders up to 4)")]
    UnsupportedOrder(usize),

    #[error("invalid elementary: {0}")]
    InvalidElementary(String),

    #[error("unknown function kind `{0}`")]
    UnknownKind(String),

    #[error("variable `{0}` declared more than once")]
    DuplicateVariable(String),

    #[error("auxiliary `{0}` references an auxiliary that is not yet defined")]
    CyclicDefinition(String),

    #[error("syntax error at {location}: {message}")]
    Syntax { location: Location, message: String },

    #[error("semantic error at {location}: {message}")]
    Semantic { location: Location, message: String },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("case error{}: {message}", location.map(|l| format!(" at {l}")).unwrap_or_default())]
    Case {
        location: Option<Location>,
        message: String,
    },

    #[error("solve did not converge: {0}")]
    NotConverged(String),
}

impl Error {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            location: Location { line, column },
            message: message.into(),
        }
    }

    pub(crate) fn semantic(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Semantic {
            location: Location { line, column },
            message: message.into(),
        }
    }

    pub(crate) fn case(message: impl Into<String>) -> Self {
        Error::Case {
            location: None,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
