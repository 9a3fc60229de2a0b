//! One error enum for the whole crate. Variants carry enough context to be
//! actionable from the command line (file, line number, offending token).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Distance gradient at coincident points; callers either skip the pair
    /// (training) or surface the error (inference).
    #[error("degenerate pair: points coincide within separation tolerance")]
    DegeneratePair,

    /// Raw direction too short to normalize.
    #[error("degenerate direction: raw direction norm below tolerance")]
    DegenerateDirection,

    #[error("empty corpus: no usable tokens or records")]
    EmptyCorpus,

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("tree parse error at byte {offset}: {msg}")]
    TreeParse { offset: usize, msg: String },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("out of vocabulary: {0:?}")]
    OutOfVocab(String),

    #[error("vocab hash mismatch: checkpoint has {expected}, dataset has {actual}")]
    VocabMismatch { expected: String, actual: String },

    #[error("non-finite gradient in {0}")]
    NonFiniteGrad(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
