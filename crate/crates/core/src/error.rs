use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid tag {0:?}")]
    InvalidTag(String),

    #[error("sentence {sentence}: {message}")]
    Structure { sentence: String, message: String },

    #[error("empty treebank")]
    EmptyTreebank,

    #[error("no edges in treebank {0:?}")]
    NoEdges(String),

    #[error("no sentences in corpus {0:?}")]
    NoSentences(String),

    #[error("missing prediction for relation {0:?}")]
    MissingPrediction(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("relation catalogs differ")]
    CatalogMismatch,

    #[error("unknown tag {0:?} outside the embedding inventory")]
    UnknownTag(String),

    #[error("training diverged at epoch {epoch}: objective {value}")]
    Diverged { epoch: usize, value: f64 },

    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
