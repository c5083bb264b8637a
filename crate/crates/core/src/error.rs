use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: invalid pitch token `{token}`")]
    InvalidPitchToken { line: usize, token: String },

    #[error("line {line}: invalid finger `{token}`")]
    InvalidFinger { line: usize, token: String },

    #[error("line {line}: onset {onset} precedes previous onset {previous}")]
    NonMonotoneOnsets {
        line: usize,
        onset: f64,
        previous: f64,
    },

    #[error("line {line}: channel {channel} disagrees with finger `{finger}`")]
    HandMismatch {
        line: usize,
        channel: u8,
        finger: String,
    },

    #[error("note {id} carries no finger label")]
    MissingFinger { id: usize },

    #[error("MIDI number {0} is outside the 88-key range 21..=108")]
    PitchOutOfRange(i32),

    #[error("training corpus is empty")]
    EmptyCorpus,

    #[error("piece has no notes")]
    EmptyPiece,

    #[error("no fingering satisfies the model constraints")]
    NoFeasiblePath,

    #[error("chord at {onset:.3}s holds {size} pitches in one hand")]
    HandOverflow { onset: f64, size: usize },

    #[error("sequence length mismatch at reference {index}: expected {expected}, found {found}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("ground truths disagree on note content at position {position}")]
    ContentMismatch { position: usize },

    #[error("need at least {needed} annotators, found {found}")]
    InsufficientAnnotators { needed: usize, found: usize },

    #[error("value {0} is outside the domain of the two-choice agreement model")]
    OutOfDomain(f64),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
