use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate uid `{0}`")]
    DuplicateId(String),

    #[error("empty label space")]
    EmptyLabelSpace,

    #[error("unknown label `{lid}` referenced by `{uid}`")]
    UnknownLabel { uid: String, lid: String },

    #[error("cannot build an index over an empty collection")]
    EmptyCollection,

    #[error("dense retrieval requires an embedder")]
    MissingEmbedder,

    #[error("embedder supplied for a {0} index")]
    UnexpectedEmbedder(&'static str),

    #[error("index file: {0}")]
    IndexFormat(String),

    #[error("template {template}: slot `{slot}` is not bound")]
    MissingSlot {
        template: String,
        slot: &'static str,
    },

    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),

    #[error("embedding service: {0}")]
    Embedding(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid demonstration: {0}")]
    Demonstration(String),

    #[error("missing upstream file {0}; run the preceding stage first")]
    MissingUpstream(PathBuf),

    #[error("prediction for `{0}` appears more than once")]
    DuplicatePrediction(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
