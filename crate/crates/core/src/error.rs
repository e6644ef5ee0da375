//! Error types shared across the engine.

use thiserror::Error;

/// Coarse error class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Lexical or grammatical problems in the query text.
    Syntax,
    /// Name resolution, schema, placeholder, or argument problems.
    Binding,
    /// Semantic backend failures (transport, unparseable output).
    Backend,
    /// File, configuration, or environment problems.
    Io,
}

/// Transport-level failure kinds for the LLM backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportErrorKind {
    Timeout,
    HttpStatus(u16),
    MalformedBody,
    Connect,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },

    #[error("unsupported operator {name} at offset {offset}")]
    UnsupportedOperator { name: String, offset: usize },

    #[error("binding error: {0}")]
    Binding(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("backend transport error ({kind:?}): {message}")]
    Transport {
        kind: TransportErrorKind,
        message: String,
    },

    #[error("backend returned unparseable output: {0}")]
    Unparseable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// The class this error belongs to, for exit-code mapping.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Syntax { .. } | Error::UnsupportedOperator { .. } => ErrorClass::Syntax,
            Error::Binding(_) | Error::Schema(_) | Error::Argument(_) => ErrorClass::Binding,
            Error::Backend(_) | Error::Transport { .. } | Error::Unparseable(_) => {
                ErrorClass::Backend
            }
            Error::Config(_) | Error::Io(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
