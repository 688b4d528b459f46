use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: dialogue {dialogue_id} utterance {utterance}: expected {expected} features, found {found}")]
    FeatureDimension {
        line: usize,
        dialogue_id: String,
        utterance: usize,
        expected: usize,
        found: usize,
    },

    #[error(
        "line {line}: dialogue {dialogue_id} utterance {utterance}: expected {expected} gold labels, found {found}"
    )]
    GoldDimension {
        line: usize,
        dialogue_id: String,
        utterance: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: duplicate dialogue id {dialogue_id}")]
    DuplicateDialogue { line: usize, dialogue_id: String },

    #[error("dialogue {dialogue_id}: {message}")]
    InvalidDialogue { dialogue_id: String, message: String },

    #[error("dialogue {dialogue_id} utterance {utterance} has no features")]
    MissingFeatures { dialogue_id: String, utterance: usize },

    #[error("dialogue {dialogue_id} utterance {utterance} has no gold label for class {class}")]
    MissingGold {
        dialogue_id: String,
        utterance: usize,
        class: usize,
    },

    #[error("unknown dialogue id {dialogue_id}")]
    UnknownDialogue { dialogue_id: String },

    #[error("dialogue {dialogue_id}: score length {found} does not match {expected} utterances")]
    ScoreLength {
        dialogue_id: String,
        expected: usize,
        found: usize,
    },

    #[error("dialogue {dialogue_id}: score {value} at utterance {utterance} is outside [0, 1]")]
    ScoreRange {
        dialogue_id: String,
        utterance: usize,
        value: f64,
    },

    #[error("missing scores for dialogue {dialogue_id} class {class}")]
    MissingScores { dialogue_id: String, class: usize },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("insufficient samples: {found} draws given, at least {required} needed")]
    InsufficientSamples { found: usize, required: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
