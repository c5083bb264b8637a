//! Deterministic inputs shared by the benchmarks.

use fingering::pig_io::{spell_midi, FingerLabel, Hand, Note, Piece};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-hand piece of `len` notes per hand: random-walk pitches, occasional
/// two-note chords, random fingers.
pub fn piece(seed: u64, len: usize) -> Piece {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut notes = Vec::with_capacity(2 * len);
    for (hand, (lo, hi)) in [(Hand::Right, (60i32, 88i32)), (Hand::Left, (33, 64))] {
        let mut pitch = rng.gen_range(lo..=hi);
        let mut t = 0.0;
        let mut chorded = true;
        for _ in 0..len {
            chorded = !chorded && rng.gen_bool(0.15);
            if !chorded {
                t += 0.25;
            }
            pitch = (pitch + rng.gen_range(-5..=5)).clamp(lo, hi);
            notes.push(Note {
                id: 0,
                onset: t,
                offset: t + 0.2,
                pitch: pitch as u8,
                spelling: spell_midi(pitch as u8),
                onset_velocity: 64,
                offset_velocity: 64,
                hand,
                finger: FingerLabel::new(hand, rng.gen_range(1..=5)),
            });
        }
    }
    notes.sort_by(|a, b| a.onset.total_cmp(&b.onset));
    for (i, n) in notes.iter_mut().enumerate() {
        n.id = i;
    }
    Piece::new(format!("bench{seed}"), notes)
}

pub fn corpus(seed: u64, pieces: usize, len: usize) -> Vec<Piece> {
    (0..pieces as u64).map(|i| piece(seed.wrapping_add(i), len)).collect()
}

/// Random digit sequences: an estimate and `refs` references.
pub fn sequences(seed: u64, refs: usize, len: usize) -> (Vec<u8>, Vec<Vec<u8>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = (0..len).map(|_| rng.gen_range(1..=5)).collect();
    let gts = (0..refs).map(|_| (0..len).map(|_| rng.gen_range(1..=5)).collect()).collect();
    (est, gts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_reproducible() {
        assert_eq!(piece(3, 50), piece(3, 50));
        assert_eq!(piece(3, 50).len(), 100);
        assert_eq!(sequences(1, 4, 20), sequences(1, 4, 20));
    }
}
