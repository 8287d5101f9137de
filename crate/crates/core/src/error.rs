use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Reading, parsing or configuration problems.
    Input,
    /// A pipeline stage produced nothing to work with.
    EmptyStage,
    /// The scaling model could not be estimated.
    Estimation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("document id must be non-empty (record {0})")]
    EmptyId(usize),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no bigrams survive threshold")]
    EmptyGraph,

    #[error("no communities")]
    NoCommunities,

    #[error("graph has no edges (m = 0)")]
    ZeroWeight,

    #[error("partition covers {partition} nodes but graph has {graph}")]
    PartitionMismatch { partition: usize, graph: usize },

    #[error("brute-force enumeration limited to {max} nodes, graph has {nodes}")]
    TooManyNodes { nodes: usize, max: usize },

    #[error("empty vocabulary after threshold")]
    EmptyVocabulary,

    #[error("matrix is empty after trimming all-zero rows and columns")]
    EmptyMatrix,

    #[error("need ≥ 2 features")]
    TooFewFeatures,

    #[error("need ≥ 2 documents")]
    TooFewDocuments,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite parameter: {0}")]
    NonFinite(String),

    #[error("unknown anchor document `{0}`")]
    UnknownAnchor(String),

    #[error("bootstrap: {failed} of {total} replicates failed to refit")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("degenerate draw: {0}")]
    Degenerate(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::EmptyGraph
            | Error::NoCommunities
            | Error::ZeroWeight
            | Error::EmptyVocabulary
            | Error::EmptyMatrix
            | Error::EmptyCorpus => ErrorKind::EmptyStage,
            Error::TooFewFeatures
            | Error::TooFewDocuments
            | Error::NonFinite(_)
            | Error::BootstrapFailures { .. }
            | Error::Degenerate(_) => ErrorKind::Estimation,
            _ => ErrorKind::Input,
        }
    }
}
