use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },

    #[error("{path}: row {row}, column `{column}`: non-binary label `{value}`")]
    NonBinaryLabel { path: PathBuf, row: usize, column: String, value: String },

    #[error("schema: {0}")]
    Schema(String),

    #[error("column `{column}`: unseen category `{value}`")]
    UnseenCategory { column: String, value: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in input at position {0}")]
    NonFinite(usize),

    #[error("{0} requires a tree-based model")]
    NotTreeModel(&'static str),

    #[error("{features} features exceed the enumeration bound of {bound}; use a sampling explainer")]
    EnumerationBound { features: usize, bound: usize },

    #[error("degenerate neighbourhood: {0}")]
    DegenerateNeighborhood(String),

    #[error("linear system is singular")]
    Singular,

    #[error("model format: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
