use qrf_core::QrfError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("{0}")]
    Core(#[from] QrfError),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

impl LabError {
    /// Process exit code: 2 for configuration problems, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Parse { .. } | LabError::Invalid(_) | LabError::UnknownScenario(_) => 2,
            LabError::Core(_) | LabError::Io { .. } => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        LabError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
