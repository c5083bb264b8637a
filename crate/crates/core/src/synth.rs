//! Sampling synthetic annotated pieces from a note HMM.
//!
//! Fingers follow the model's interpolated transitions. Each pitch is drawn
//! from the candidates in a fixed range with weights proportional to the
//! model's output score for the window ending at that note, so the samples
//! are consistent with whatever the model rewards. Notes are evenly spaced
//! and never simultaneous.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};
use crate::note_hmm::NoteHmmModel;
use crate::pairwise::DIGITS;
use crate::pig_io::{spell_midi, FingerLabel, Hand, Note, Piece};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub pieces: usize,
    pub notes_per_hand: usize,
    /// Inclusive MIDI ranges, `[right, left]`.
    pub ranges: [(u8, u8); 2],
    /// Seconds between consecutive onsets of one hand.
    pub step: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            pieces: 10,
            notes_per_hand: 40,
            ranges: [(60, 84), (36, 60)],
            step: 0.25,
        }
    }
}

fn draw(rng: &mut impl Rng, weights: &[f64]) -> Result<usize> {
    let dist = WeightedIndex::new(weights).map_err(|e| Error::InvalidConfig(format!("cannot sample: {e}")))?;
    Ok(dist.sample(rng))
}

/// Pitches and digits of one sampled hand part.
pub fn sample_part(model: &NoteHmmModel, hand: Hand, len: usize, range: (u8, u8), rng: &mut impl Rng) -> Result<(Vec<u8>, Vec<u8>)> {
    let (lo, hi) = range;
    if lo > hi {
        return Err(Error::InvalidConfig("empty pitch range".into()));
    }
    let order = model.config().order;
    let candidates: Vec<u8> = (lo..=hi).collect();
    let mut digits: Vec<u8> = Vec::with_capacity(len);
    let mut pitches: Vec<u8> = Vec::with_capacity(len);
    for n in 0..len {
        let weights: Vec<f64> = if n == 0 {
            (1..=DIGITS as u8).map(|d| model.initial_prob(hand, d)).collect()
        } else {
            let context = &digits[n - n.min(order)..];
            (1..=DIGITS as u8).map(|d| model.transition_prob(hand, context, d)).collect()
        };
        digits.push(draw(rng, &weights)? as u8 + 1);
        let window_start = n - n.min(order);
        let pitch = if n == 0 {
            candidates[rng.gen_range(0..candidates.len())]
        } else {
            let mut window: Vec<u8> = pitches[window_start..].to_vec();
            window.push(0);
            let weights: Vec<f64> = candidates
                .iter()
                .map(|&p| {
                    *window.last_mut().unwrap() = p;
                    model.output_score(hand, &window, &digits[window_start..])
                })
                .collect();
            candidates[draw(rng, &weights)?]
        };
        pitches.push(pitch);
    }
    Ok((pitches, digits))
}

/// A two-handed annotated piece; notes are in onset order with the right
/// hand first among equal onsets.
pub fn sample_piece(model: &NoteHmmModel, id: impl Into<String>, spec: &SynthSpec, rng: &mut impl Rng) -> Result<Piece> {
    let mut notes = Vec::with_capacity(2 * spec.notes_per_hand);
    let parts = [
        sample_part(model, Hand::Right, spec.notes_per_hand, spec.ranges[0], rng)?,
        sample_part(model, Hand::Left, spec.notes_per_hand, spec.ranges[1], rng)?,
    ];
    for n in 0..spec.notes_per_hand {
        for hand in Hand::BOTH {
            let (pitches, digits) = &parts[hand.index()];
            let onset = n as f64 * spec.step;
            notes.push(Note {
                id: notes.len(),
                onset,
                offset: onset + spec.step,
                pitch: pitches[n],
                spelling: spell_midi(pitches[n]),
                onset_velocity: 64,
                offset_velocity: 64,
                hand,
                finger: FingerLabel::new(hand, digits[n]),
            });
        }
    }
    Ok(Piece::new(id, notes))
}

pub fn sample_corpus(model: &NoteHmmModel, spec: &SynthSpec, rng: &mut impl Rng) -> Result<Vec<Piece>> {
    (0..spec.pieces)
        .map(|i| sample_piece(model, format!("synth-{:03}", i + 1), spec, rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::note_hmm::NoteHmmConfig;
    use crate::pig_io::parse_fingering_file;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_are_reproducible_and_in_range() {
        let seed = parse_fingering_file("0\t0.0\t0.5\tC4\t64\t80\t0\t1\n1\t0.0\t0.5\tC3\t64\t80\t1\t-5\n2\t0.5\t1.0\tD4\t64\t80\t0\t2\n3\t0.5\t1.0\tD3\t64\t80\t1\t-4\n").unwrap();
        let model = NoteHmmModel::train(&[seed], NoteHmmConfig::tuned(2)).unwrap();
        let spec = SynthSpec {
            pieces: 2,
            notes_per_hand: 12,
            ..SynthSpec::default()
        };
        let a = sample_corpus(&model, &spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_corpus(&model, &spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        for piece in &a {
            assert_eq!(piece.len(), 24);
            for n in &piece.notes {
                let (lo, hi) = spec.ranges[n.hand.index()];
                assert!((lo..=hi).contains(&n.pitch));
                assert_eq!(n.finger.unwrap().hand, n.hand);
            }
        }
    }
}
