//! Crate-wide error type.
//!
//! The CLI maps errors to process exit codes: configuration problems exit
//! with 1, I/O failures with 2, and data errors (malformed or insufficient
//! input) with 3.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("document {0:?} is empty after tokenization")]
    EmptyDocument(String),

    #[error("corpus contains no documents")]
    EmptyCorpus,

    #[error("invalid grouping in document {doc_id:?}: {detail}")]
    InvalidGrouping { doc_id: String, detail: String },

    #[error("invalid token vectors in document {doc_id:?}: {detail}")]
    InvalidVectors { doc_id: String, detail: String },

    #[error("parse error in {path} at line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("background table is empty")]
    EmptyBackground,

    #[error("embedding file contains no valid vectors")]
    EmptyEmbeddings,

    #[error("vector dimension mismatch: {left} vs {right}")]
    DimError { left: usize, right: usize },

    #[error("found only {found} eligible seed words, {requested} requested")]
    InsufficientSeeds { found: usize, requested: usize },

    #[error("diff-set contains no seeds")]
    NoSeeds,

    #[error("attention scores for document {0:?} are all zero")]
    DegenerateAttention(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthError { expected: usize, got: usize },

    #[error("invalid scores for document {doc_id:?}: {detail}")]
    InvalidScores { doc_id: String, detail: String },

    #[error("span [{start}, {end}) out of range for document of {n} tokens")]
    SpanError {
        start: usize,
        end: usize,
        n: usize,
    },

    #[error("replacement vocabulary is empty")]
    NoVocabulary,

    #[error("plan references unknown document {0:?}")]
    UnknownDocument(String),

    #[error("invalid mask plan for document {doc_id:?}: {detail}")]
    InvalidPlan { doc_id: String, detail: String },

    #[error("missing {kind} record for document {doc_id:?}")]
    MissingAnnotation { kind: &'static str, doc_id: String },

    #[error("distribution for document {0:?} carries no nearest-seed indices")]
    NotNearestNeighbor(String),

    #[error("series has zero variance, correlation undefined")]
    DegenerateSeries,

    #[error("no masked tokens in the given plans")]
    EmptyPlans,
}

impl Error {
    /// Open a file-scoped I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 config, 2 I/O, 3 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
