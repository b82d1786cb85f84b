use std::path::PathBuf;

use thiserror::Error;

use crate::cipher::CipherLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// No transformation of this kind can change the input.
    #[error("{label} cannot change this input: {reason}")]
    Uncipherable { label: CipherLabel, reason: &'static str },

    #[error("corpus exhausted: needed {needed} usable lines, found {available}")]
    InsufficientCorpus { needed: usize, available: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("text is empty after cleaning")]
    EmptyAfterCleaning,

    #[error("{}{}: {message}", .source_name, .line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        source_name: String,
        line: Option<usize>,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(source_name: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}
