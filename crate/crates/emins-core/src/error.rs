//! Error type shared across the crate.

use std::path::PathBuf;

use crate::graph::FlipOp;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A required dataset file does not exist.
    #[error("missing dataset file: {0}")]
    MissingFile(PathBuf),

    /// Structurally invalid dataset content (bad references, self-loops,
    /// duplicate edges). Line numbers are 1-based.
    #[error("{file}:{line}: {msg}")]
    Format {
        file: String,
        line: usize,
        msg: String,
    },

    /// A token that should be an integer is not.
    #[error("{file}:{line}: cannot parse {token:?} as an integer")]
    Parse {
        file: String,
        line: usize,
        token: String,
    },

    /// A caller broke an API contract (shape mismatch, stale cache, out-of-range
    /// label, asymmetric matrix, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A flip list asked to delete an absent edge or add a present one.
    #[error("inconsistent flip: {op} ({u}, {v}) {reason}")]
    FlipConflict {
        op: FlipOp,
        u: usize,
        v: usize,
        reason: &'static str,
    },

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged (non-finite value) at {0}")]
    Divergence(String),

    /// Stratified splitting needs at least two graphs per class.
    #[error("cannot stratify: class {label} has only {count} graph(s)")]
    Stratification { label: usize, count: usize },

    /// Datasets that must line up (clean vs. variant) do not.
    #[error("dataset mismatch: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(file: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            file: file.to_string(),
            line,
            msg: msg.into(),
        }
    }
}
