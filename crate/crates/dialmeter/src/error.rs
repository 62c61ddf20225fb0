use thiserror::Error;

pub type Result<T> = std::result::Result<T, FormatError>;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// `line` is 0 for errors not tied to an input line.
    #[error("line {line}: {field}: {message}")]
    Validation {
        line: usize,
        field: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] dialmeter_core::Error),
}

impl FormatError {
    pub fn validation(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError::Validation {
            line,
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            FormatError::Parse { .. } => "parse",
            FormatError::Validation { .. } => "validation",
            FormatError::Io { .. } => "io",
            FormatError::Core(_) => "validation",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            FormatError::Parse { line, .. } | FormatError::Validation { line, .. } => Some(*line),
            _ => None,
        }
    }
}
