//! Directories of fingering files, and a common face for both model kinds.
//!
//! Two layouts are read:
//!
//! * one directory per piece whose files are named by annotator id, e.g.
//!   `001/1.txt`, `001/2.txt`
//! * a flat directory of `NNN-A_fingering.txt` files, where `NNN` is the
//!   piece id and `A` the annotator id
//!
//! Both may be mixed; pieces are returned sorted by id.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chord_hmm::{ChordHmmModel, ChordHmmParams};
use crate::error::{Error, Result};
use crate::eval_measures::{evaluate_piece, PieceEvaluation, RecombinationConfig};
use crate::note_hmm::{NoteHmmConfig, NoteHmmModel};
use crate::pig_io::{parse_fingering_file, FingerLabel, GroundTruthSet, Hand, Piece};

/// Reads one fingering file, attaching the path to any error.
pub fn load_piece(path: &Path) -> Result<Piece> {
    let read = || -> Result<Piece> {
        let text = fs::read_to_string(path)?;
        let mut piece = parse_fingering_file(&text)?;
        let (id, annotator) = ids_from_path(path);
        piece.id = id;
        piece.annotator = annotator;
        Ok(piece)
    };
    read().map_err(|e| e.in_file(path))
}

/// Piece and annotator ids implied by a file name. `001-2_fingering.txt`
/// gives ("001", "2"); `dir/3.txt` gives ("dir", "3"); any other stem is the
/// piece id.
fn ids_from_path(path: &Path) -> (String, Option<String>) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let core = stem.strip_suffix("_fingering").unwrap_or(stem);
    if let Some((piece, annotator)) = core.split_once('-') {
        if !piece.is_empty() && !annotator.is_empty() {
            return (piece.to_string(), Some(annotator.to_string()));
        }
    }
    (core.to_string(), None)
}

fn is_fingering_file(path: &Path) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e == "txt")
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::from(e).in_file(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::from(e).in_file(dir))?;
    entries.sort();
    Ok(entries)
}

/// Loads every piece under `dir` and groups annotators of the same piece.
pub fn load_dataset(dir: &Path) -> Result<Vec<GroundTruthSet>> {
    let mut groups: BTreeMap<String, Vec<Piece>> = BTreeMap::new();
    for entry in sorted_entries(dir)? {
        if entry.is_dir() {
            let piece_id = entry.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            for file in sorted_entries(&entry)?.into_iter().filter(|p| is_fingering_file(p)) {
                let mut piece = load_piece(&file)?;
                let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                piece.annotator = Some(stem.to_string());
                piece.id = piece_id.clone();
                groups.entry(piece_id.clone()).or_default().push(piece);
            }
        } else if is_fingering_file(&entry) {
            let piece = load_piece(&entry)?;
            groups.entry(piece.id.clone()).or_default().push(piece);
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    groups
        .into_iter()
        .map(|(id, pieces)| GroundTruthSet::from_pieces(id.clone(), &pieces).map_err(|e| e.in_file(dir.join(&id))))
        .collect()
}

/// Every annotator's fingering as a separate training piece.
pub fn training_pieces(sets: &[GroundTruthSet]) -> Vec<Piece> {
    sets.iter()
        .flat_map(|s| (0..s.annotator_count()).map(move |g| s.annotated_piece(g)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    NoteHmm(NoteHmmConfig),
    ChordHmm(ChordHmmParams),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    NoteHmm(NoteHmmModel),
    ChordHmm(ChordHmmModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Fingers in the file order of the input piece.
    pub fingers: Vec<FingerLabel>,
    /// Hands decoded without the crossing or sustain constraint because no
    /// path satisfied it.
    pub relaxed: Vec<Hand>,
}

impl Estimator {
    pub fn train(corpus: &[Piece], config: &ModelConfig) -> Result<Estimator> {
        Ok(match config {
            ModelConfig::NoteHmm(c) => Estimator::NoteHmm(NoteHmmModel::train(corpus, c.clone())?),
            ModelConfig::ChordHmm(p) => Estimator::ChordHmm(ChordHmmModel::train(corpus, p.clone())?),
        })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Estimator::NoteHmm(m) => ModelConfig::NoteHmm(m.config().clone()),
            Estimator::ChordHmm(m) => ModelConfig::ChordHmm(m.params().clone()),
        }
    }

    /// The same trained tables under the weights of `config`. Only the
    /// coefficients may differ from the trained configuration.
    pub fn reweighted(&self, config: &ModelConfig) -> Result<Estimator> {
        match (self, config) {
            (Estimator::NoteHmm(m), ModelConfig::NoteHmm(c)) => {
                Ok(Estimator::NoteHmm(m.with_coefficients(c.alpha.clone(), c.lambda.clone())?))
            }
            (Estimator::ChordHmm(m), ModelConfig::ChordHmm(p)) => Ok(Estimator::ChordHmm(m.with_params(p.clone())?)),
            _ => Err(Error::InvalidConfig("model kind differs from the trained model".into())),
        }
    }

    /// Decodes each hand part and maps the digits back to file order.
    pub fn estimate(&self, piece: &Piece) -> Result<Estimate> {
        if piece.is_empty() {
            return Err(Error::EmptyPiece);
        }
        let mut fingers: Vec<Option<FingerLabel>> = vec![None; piece.len()];
        let mut relaxed = Vec::new();
        for hand in Hand::BOTH {
            let idx = piece.hand_indices(hand);
            if idx.is_empty() {
                continue;
            }
            let notes: Vec<_> = idx.iter().map(|&i| piece.notes[i].clone()).collect();
            let (digits, was_relaxed) = match self {
                Estimator::NoteHmm(m) => {
                    let d = m.decode(hand, &notes)?;
                    (d.digits, d.constraint_relaxed)
                }
                Estimator::ChordHmm(m) => {
                    let d = m.decode(hand, &notes)?;
                    (d.digits, d.constraint_relaxed)
                }
            };
            if was_relaxed {
                relaxed.push(hand);
            }
            for (&i, &digit) in idx.iter().zip(&digits) {
                fingers[i] = FingerLabel::new(hand, digit);
            }
        }
        let fingers = fingers
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::NoFeasiblePath)?;
        Ok(Estimate { fingers, relaxed })
    }

    /// Copy of `piece` carrying the estimated fingers.
    pub fn annotate(&self, piece: &Piece) -> Result<(Piece, Vec<Hand>)> {
        let est = self.estimate(piece)?;
        let mut out = piece.clone();
        for (n, f) in out.notes.iter_mut().zip(est.fingers) {
            n.finger = Some(f);
        }
        Ok((out, est.relaxed))
    }

    /// Estimates and scores every piece of `sets`, in the order given.
    /// Pieces the chord model cannot decode because a chord exceeds five
    /// notes are excluded and listed; any other error aborts.
    pub fn evaluate(&self, sets: &[GroundTruthSet], rec: &RecombinationConfig) -> Result<CorpusEvaluation> {
        let results: Vec<Result<Option<PieceEvaluation>>> = sets
            .par_iter()
            .map(|s| match self.estimate(&s.piece()) {
                Ok(est) => evaluate_piece(&est.fingers, s, rec).map(Some),
                Err(Error::HandOverflow { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect();
        let mut out = CorpusEvaluation::default();
        for (set, r) in sets.iter().zip(results) {
            match r? {
                Some(e) => out.pieces.push(e),
                None => out.excluded.push(set.piece_id.clone()),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusEvaluation {
    pub pieces: Vec<PieceEvaluation>,
    /// Ids of pieces skipped because of chord overflow.
    pub excluded: Vec<String>,
}
