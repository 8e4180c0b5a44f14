use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] dephaskit::Error),

    #[error("JSON encoding failed: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{failed} of {total} runs failed; see the output files for details")]
    RunsFailed { failed: usize, total: usize },

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for usage and input problems, 2 for numerical or solver failures.
    pub fn exit_code(&self) -> u8 {
        use dephaskit::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json(_) => 1,
            CliError::Core(e) => match e {
                E::Io(_)
                | E::Parse { .. }
                | E::InsufficientData { .. }
                | E::Validation(_)
                | E::UnknownPreset { .. } => 1,
                _ => 2,
            },
            CliError::RunsFailed { .. } | CliError::Numerical(_) => 2,
        }
    }
}
