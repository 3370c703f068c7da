use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration {}: {message}", path.as_ref().map_or("<inline>".into(), |p| p.display().to_string()))]
    Config { path: Option<PathBuf>, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] upc_core::Error),
    #[error("{failed} of {total} table cells failed")]
    Incomplete { failed: usize, total: usize },
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: Option<PathBuf>, message: impl Into<String>) -> Self {
        SimError::Config {
            path,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SimError::Io { .. } => "io",
            SimError::Config { .. } => "config",
            SimError::Usage(_) => "usage",
            SimError::Csv(_) => "csv",
            SimError::Core(e) => e.kind(),
            SimError::Incomplete { .. } => "incomplete",
        }
    }

    /// Process exit status: 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config { .. } | SimError::Usage(_) => 2,
            SimError::Core(upc_core::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }

    fn path(&self) -> Option<&PathBuf> {
        match self {
            SimError::Io { path, .. } => Some(path),
            SimError::Config { path, .. } => path.as_ref(),
            _ => None,
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_record(&self) -> String {
        let mut record = serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
            }
        });
        if let Some(path) = self.path() {
            record["error"]["path"] = serde_json::Value::String(path.display().to_string());
        }
        record.to_string()
    }
}
