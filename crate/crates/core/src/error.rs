use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },

    #[error("{doc_id}: sentence {sentence}, token {token}: text {expected:?} does not match document span {found:?}")]
    SpanMismatch {
        doc_id: String,
        sentence: usize,
        token: usize,
        expected: String,
        found: String,
    },

    #[error("{doc_id}: sentence {sentence}: {message}")]
    TreeViolation {
        doc_id: String,
        sentence: usize,
        message: String,
    },

    #[error("{doc_id}: sentence {sentence}: dependency cycle through token {token}")]
    DependencyCycle {
        doc_id: String,
        sentence: usize,
        token: usize,
    },

    #[error("{doc_id}: {message}")]
    InvalidDocument { doc_id: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("row {row} sums to {sum}, expected a row-stochastic matrix")]
    NotRowStochastic { row: usize, sum: f64 },

    #[error("bucket mismatch: {0}")]
    BucketMismatch(String),

    #[error("invalid matrix container: {0}")]
    Container(String),

    #[error("stage {stage} failed for {doc_id}: {source}")]
    Stage {
        stage: &'static str,
        doc_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, doc_id: &str) -> Self {
        Error::Stage {
            stage,
            doc_id: doc_id.to_owned(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 for bad input, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Shape(_) | Error::EmptyGraph => 2,
            _ => 1,
        }
    }
}
