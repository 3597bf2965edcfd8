use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] splitiv_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{failed} of {total} trials failed, too few left to summarize")]
    TooManyFailures { failed: usize, total: usize },
}

impl HarnessError {
    /// Stable snake_case identifier for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Core(e) => e.kind(),
            HarnessError::Io { .. } => "io",
            HarnessError::Json(_) => "json",
            HarnessError::Csv(_) => "csv",
            HarnessError::Config(_) => "config",
            HarnessError::TooManyFailures { .. } => "too_many_failures",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
