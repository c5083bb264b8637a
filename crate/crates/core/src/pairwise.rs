//! Pairwise output factors `F(d; f', f)`: for every ordered finger pair, a
//! distribution over clamped pitch displacements.

use crate::error::{Error, Result};
use crate::pitch_space::{reflect_x, Displacement, DisplacementAlphabet, PitchRepr};

pub const DIGITS: usize = 5;
pub const PAIRS: usize = DIGITS * DIGITS;

/// Row index of the finger pair `(from, to)`, digits 1..=5.
#[inline]
pub fn pair_index(from: u8, to: u8) -> usize {
    (from as usize - 1) * DIGITS + (to as usize - 1)
}

/// Which symmetries tie output cells together during training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Symmetries {
    pub time_inversion: bool,
    pub reflection: bool,
}

impl Symmetries {
    pub const NONE: Symmetries = Symmetries {
        time_inversion: false,
        reflection: false,
    };
}

/// Integer occurrence counts of (displacement, finger pair).
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    alphabet: DisplacementAlphabet,
    counts: Vec<u64>,
}

impl PairCounts {
    pub fn new(repr: PitchRepr, delta_p_max: i32) -> PairCounts {
        let alphabet = DisplacementAlphabet::new(repr, delta_p_max);
        let counts = vec![0; PAIRS * alphabet.len()];
        PairCounts { alphabet, counts }
    }

    pub fn alphabet(&self) -> &DisplacementAlphabet {
        &self.alphabet
    }

    pub fn add(&mut self, d: Displacement, from: u8, to: u8) {
        let cell = self
            .alphabet
            .index(d)
            .expect("clamped displacement lies in the alphabet");
        self.counts[pair_index(from, to) * self.alphabet.len() + cell] += 1;
    }

    pub fn get(&self, d: Displacement, from: u8, to: u8) -> u64 {
        self.alphabet
            .index(d)
            .map_or(0, |cell| self.counts[pair_index(from, to) * self.alphabet.len() + cell])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn map_cells(&self, f: impl Fn(usize, usize) -> u64) -> PairCounts {
        let a = self.alphabet.len();
        let mut counts = vec![0; self.counts.len()];
        for pair in 0..PAIRS {
            for cell in 0..a {
                counts[pair * a + cell] = f(pair, cell);
            }
        }
        PairCounts {
            alphabet: self.alphabet.clone(),
            counts,
        }
    }

    /// Counts with every displacement mirrored in x.
    pub fn reflected(&self) -> PairCounts {
        let a = self.alphabet.len();
        let cells = self.alphabet.cells();
        self.map_cells(|pair, cell| {
            let mirror = self.alphabet.index(reflect_x(cells[cell])).unwrap();
            self.counts[pair * a + mirror]
        })
    }

    /// `C(d; f', f) + C(-d; f, f')`, which makes the table time-inversion symmetric.
    pub fn time_tied(&self) -> PairCounts {
        let a = self.alphabet.len();
        let cells = self.alphabet.cells();
        self.map_cells(|pair, cell| {
            let (from, to) = (pair / DIGITS, pair % DIGITS);
            let swapped = to * DIGITS + from;
            let neg = self.alphabet.index(-cells[cell]).unwrap();
            self.counts[pair * a + cell] + self.counts[swapped * a + neg]
        })
    }

    pub fn merged(&self, other: &PairCounts) -> PairCounts {
        assert_eq!(self.alphabet, other.alphabet);
        self.map_cells(|pair, cell| {
            let i = pair * self.alphabet.len() + cell;
            self.counts[i] + other.counts[i]
        })
    }
}

/// Ties right- and left-hand counts according to `symmetries`. With
/// reflection the left-hand counts are the x-mirror of the pooled right-hand
/// counts.
pub fn tie_hands(right: PairCounts, left: PairCounts, symmetries: Symmetries) -> (PairCounts, PairCounts) {
    let mut right = if symmetries.reflection {
        right.merged(&left.reflected())
    } else {
        right
    };
    let mut left = left;
    if symmetries.time_inversion {
        right = right.time_tied();
        left = left.time_tied();
    }
    if symmetries.reflection {
        left = right.reflected();
    }
    (right, left)
}

/// Normalized pairwise factor table.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    alphabet: DisplacementAlphabet,
    probs: Vec<f64>,
    logs: Vec<f64>,
}

impl PairTable {
    /// Additive smoothing: `(c + eps) / (total + eps * |alphabet|)` per finger
    /// pair. A row with no mass at all is uniform.
    pub fn from_counts(counts: &PairCounts, epsilon: f64) -> PairTable {
        let a = counts.alphabet.len();
        let mut probs = vec![0.0; counts.counts.len()];
        for pair in 0..PAIRS {
            let row = &counts.counts[pair * a..(pair + 1) * a];
            let total: u64 = row.iter().sum();
            let denom = total as f64 + epsilon * a as f64;
            for (cell, &c) in row.iter().enumerate() {
                probs[pair * a + cell] = if denom > 0.0 {
                    (c as f64 + epsilon) / denom
                } else {
                    1.0 / a as f64
                };
            }
        }
        PairTable::from_probs(counts.alphabet.clone(), probs)
    }

    /// Builds a table from explicit probabilities laid out row-major by
    /// finger pair, then by alphabet cell.
    pub fn from_probs(alphabet: DisplacementAlphabet, probs: Vec<f64>) -> PairTable {
        let logs = probs.iter().map(|p| p.ln()).collect();
        PairTable {
            alphabet,
            probs,
            logs,
        }
    }

    pub fn from_probs_checked(alphabet: DisplacementAlphabet, probs: Vec<f64>) -> Result<PairTable> {
        if probs.len() != PAIRS * alphabet.len() {
            return Err(Error::InvalidConfig(format!(
                "output table has {} cells, expected {}",
                probs.len(),
                PAIRS * alphabet.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidConfig("output probabilities must be finite and non-negative".into()));
        }
        Ok(PairTable::from_probs(alphabet, probs))
    }

    pub fn alphabet(&self) -> &DisplacementAlphabet {
        &self.alphabet
    }

    pub fn prob(&self, d: Displacement, from: u8, to: u8) -> f64 {
        self.alphabet
            .index(d)
            .map_or(0.0, |cell| self.probs[pair_index(from, to) * self.alphabet.len() + cell])
    }

    #[inline]
    pub fn log_prob_at(&self, cell: usize, pair: usize) -> f64 {
        self.logs[pair * self.alphabet.len() + cell]
    }

    pub fn row(&self, from: u8, to: u8) -> &[f64] {
        let a = self.alphabet.len();
        let p = pair_index(from, to);
        &self.probs[p * a..(p + 1) * a]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_counts() -> PairCounts {
        let mut c = PairCounts::new(PitchRepr::Lattice, 4);
        c.add(Displacement::new(2, 0), 1, 2);
        c.add(Displacement::new(2, 0), 1, 2);
        c.add(Displacement::new(3, 1), 2, 4);
        c.add(Displacement::new(-8, -1), 5, 1);
        c
    }

    #[test]
    fn time_tying_is_symmetric() {
        let tied = sample_counts().time_tied();
        assert_eq!(tied.get(Displacement::new(2, 0), 1, 2), 2);
        assert_eq!(tied.get(Displacement::new(-2, 0), 2, 1), 2);
        assert_eq!(tied.get(Displacement::new(-3, -1), 4, 2), 1);
        assert_eq!(tied.total(), 2 * sample_counts().total());
    }

    #[test]
    fn rows_are_normalized() {
        let table = PairTable::from_counts(&sample_counts(), 0.5);
        for f in 1..=5 {
            for g in 1..=5 {
                let s: f64 = table.row(f, g).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
        let bare = PairTable::from_counts(&sample_counts(), 0.0);
        assert_eq!(bare.prob(Displacement::new(2, 0), 1, 2), 1.0);
        let n = bare.alphabet().len() as f64;
        assert_eq!(bare.prob(Displacement::ZERO, 3, 3), 1.0 / n);
    }

    #[test]
    fn reflection_tie_mirrors_left_hand() {
        let mut left = PairCounts::new(PitchRepr::Lattice, 4);
        left.add(Displacement::new(-3, 1), 1, 3);
        let (r, l) = tie_hands(sample_counts(), left, Symmetries { time_inversion: true, reflection: true });
        for &d in r.alphabet().cells() {
            for f in 1..=5 {
                for g in 1..=5 {
                    assert_eq!(l.get(d, f, g), r.get(reflect_x(d), f, g));
                    assert_eq!(r.get(d, f, g), r.get(-d, g, f));
                    assert_eq!(l.get(d, f, g), l.get(-d, g, f));
                }
            }
        }
    }
}
