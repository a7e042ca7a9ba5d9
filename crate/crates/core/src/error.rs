use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by matrix setup/attachment, model fitting, and
/// cross-validation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("descriptor {path}: {msg}")]
    Descriptor { path: PathBuf, msg: String },

    #[error(
        "size mismatch: descriptor declares {expected} bytes of data but {path} holds {actual}"
    )]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("invalid row index set: {0}")]
    InvalidIndex(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("screening policy error: {0}")]
    Policy(String),

    #[error("convergence failure at lambda = {lambda:.6e} after {iters} iterations{}", fold.map(|f| format!(" (fold {f})")).unwrap_or_default())]
    Convergence {
        lambda: f64,
        iters: usize,
        fold: Option<usize>,
    },

    #[error("KKT violation loop exceeded {rounds} rounds at lambda = {lambda:.6e}")]
    KktLoop { lambda: f64, rounds: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 for usage/input problems, 3 for
    /// convergence failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Convergence { .. } | Error::KktLoop { .. } => 3,
            _ => 2,
        }
    }
}
