//! Piano fingering estimation with note-level and chord-level hidden Markov
//! models, plus match-rate measures for comparing an estimate against several
//! annotators' fingerings.

pub mod agreement;
pub mod chord_hmm;
pub mod corpus;
pub mod error;
pub mod eval_measures;
pub mod experiments;
pub mod note_hmm;
pub mod model_file;
pub mod pairwise;
pub mod pig_io;
pub mod pitch_space;
mod stats;
pub mod synth;

pub use agreement::{AgreementReport, MultiplicityUnit};
pub use chord_hmm::{ChordHmmModel, ChordHmmParams};
pub use corpus::{CorpusEvaluation, Estimate, Estimator, ModelConfig};
pub use error::{Error, Result};
pub use eval_measures::{Cost, MatchRateReport, Rates, RecombinationConfig};
pub use experiments::{ScalingFit, TuningSpec};
pub use note_hmm::{NoteHmmConfig, NoteHmmModel};
pub use pairwise::Symmetries;
pub use pig_io::{FingerLabel, GroundTruthSet, Hand, Note, Piece};
pub use pitch_space::PitchRepr;
