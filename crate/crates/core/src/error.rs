use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid blank: radius {radius:.6} mm at theta = {theta:.6} rad is not positive")]
    InvalidBlank { theta: f64, radius: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular design: model columns {columns:?} are linearly dependent on the others")]
    SingularDesign { columns: Vec<String> },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("insufficient data: {found} points, at least {required} required")]
    InsufficientData { found: usize, required: usize },

    #[error("ambiguous angular ordering: duplicate angles {duplicates:?}")]
    AmbiguousAngles { duplicates: Vec<f64> },

    #[error("campaign lifecycle: {0}")]
    Lifecycle(String),

    #[error("no campaign found in {0}; run `init` first")]
    FreshState(PathBuf),

    #[error(
        "campaign schema version {found} is not supported (expected {expected}); migration needed"
    )]
    MigrationNeeded { found: u32, expected: u32 },

    #[error("integrity check failed for {what}: {detail}")]
    Integrity { what: String, detail: String },

    #[error("campaign directory is locked ({0} exists)")]
    Locked(PathBuf),

    #[error("report incomplete; missing data for: {}", missing.join(", "))]
    ReportIncomplete { missing: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Numeric(_) | Error::SingularDesign { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
