use std::path::PathBuf;

/// Errors surfaced by the library. The CLI maps each variant onto an exit code.
#[derive(Debug, thiserror::Error)]
pub enum ChnsError {
    #[error("invalid parameter: {clause}: {detail}")]
    InvalidParameter { clause: &'static str, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("linear solver failed: {0}")]
    LinearSolver(#[from] crate::linalg::SolveError),

    #[error("step failed at t={t}: {reason}")]
    StepFailed {
        t: f64,
        reason: String,
        report: Box<crate::stepper::StepReport>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

impl ChnsError {
    pub fn invalid(clause: &'static str, detail: impl Into<String>) -> Self {
        ChnsError::InvalidParameter {
            clause,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ChnsError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = ChnsError> = std::result::Result<T, E>;
