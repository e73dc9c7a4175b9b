//! Error type shared across the crate.
//!
//! Variants are grouped by how a caller should react: configuration and
//! usage mistakes, malformed or out-of-domain data, and numeric failures
//! (e.g. an eigensolver that does not converge). The CLI maps these groups
//! onto distinct process exit codes.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or API usage (bad hyperparameter, count larger
    /// than a collection, missing class coverage, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A feature value outside the kernel domain [0, 1].
    #[error("feature {index} is {value}, outside the required domain [0, 1]")]
    FeatureRange { index: usize, value: f64 },

    /// Two samples (or a sample and a model) disagree on dimensionality.
    #[error("dimension mismatch: {left} features vs {right} features")]
    Dimension { left: usize, right: usize },

    /// A labeled set does not cover every class in {0, ..., P-1}.
    #[error("classes without any labeled sample: {missing:?} (P = {p})")]
    ClassCoverage { missing: Vec<usize>, p: usize },

    /// An operation on clusters requires every cluster to be non-empty.
    #[error("cluster {class_index} has no members")]
    EmptyCluster { class_index: usize },

    /// Malformed IDX file; `offset` is the byte position of the violation.
    #[error("{}: {detail} at byte offset {offset}", path.display())]
    IdxFormat {
        path: PathBuf,
        offset: u64,
        detail: String,
    },

    /// Malformed CSV content; `row` and `col` are 1-based.
    #[error("{}: row {row}, column {col}: {detail}", path.display())]
    CsvFormat {
        path: PathBuf,
        row: usize,
        col: usize,
        detail: String,
    },

    /// I/O failure tagged with the path involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Numeric failure (non-convergence, invalid intermediate value).
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Helper for wrapping an I/O error with its path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
