//! Chord-level fingering HMM.
//!
//! Notes are clustered into chords by onset; a note that is still held when a
//! later chord starts is a (sustained) member of that chord too and keeps its
//! finger. The hidden state of a chord assigns distinct, non-crossing digits
//! to its pitches, so a chord of K pitches has C(5, K) states.
//!
//! A state transition is scored by pairwise factors: finger and displacement
//! factors between every pitch of the previous chord and every pitch of the
//! current one, and the same kinds of factors between every ordered pair of
//! pitches inside the current chord. Each chord's log contribution is scaled
//! by `K^-zeta`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::note_hmm::DEFAULT_CHORD_THRESHOLD;
use crate::pairwise::{tie_hands, PairCounts, PairTable, Symmetries, DIGITS};
use crate::pig_io::{Hand, Note, Piece};
use crate::pitch_space::{displacement, PitchRepr, DEFAULT_DELTA_P_MAX};

pub const MAX_CHORD_SIZE: usize = 5;
const ONSET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordHmmParams {
    /// Exponent of the across-chord finger factors.
    pub beta1: f64,
    /// Exponent of the within-chord finger factors.
    pub beta2: f64,
    /// Exponent of the across-chord output factors.
    pub gamma1: f64,
    /// Exponent of the within-chord output factors.
    pub gamma2: f64,
    pub zeta: f64,
    pub chord_threshold: f64,
    /// A note held past a later chord onset by no more than this many seconds
    /// is treated as released. Zero keeps durations as written.
    pub offset_truncation: f64,
    pub delta_p_max: i32,
    pub symmetries: Symmetries,
    pub smoothing_epsilon: f64,
}

impl Default for ChordHmmParams {
    fn default() -> Self {
        ChordHmmParams {
            beta1: 0.94,
            beta2: 4.70,
            gamma1: 7.53,
            gamma2: 5.29,
            zeta: 0.10,
            chord_threshold: DEFAULT_CHORD_THRESHOLD,
            offset_truncation: 0.0,
            delta_p_max: DEFAULT_DELTA_P_MAX,
            symmetries: Symmetries::NONE,
            smoothing_epsilon: 0.5,
        }
    }
}

impl ChordHmmParams {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.beta1, self.beta2, self.gamma1, self.gamma2, self.zeta];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig("chord weights must be finite and non-negative".into()));
        }
        if !(self.chord_threshold >= 0.0 && self.offset_truncation >= 0.0 && self.smoothing_epsilon >= 0.0) {
            return Err(Error::InvalidConfig("thresholds and smoothing must be non-negative".into()));
        }
        if self.delta_p_max < 1 {
            return Err(Error::InvalidConfig("delta_p_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChordComponent {
    pub pitch: u8,
    /// Index of the source note within the hand part.
    pub note: usize,
    /// Held over from an earlier chord.
    pub sustained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chord {
    pub onset: f64,
    /// Sorted by ascending pitch.
    pub components: Vec<ChordComponent>,
}

impl Chord {
    pub fn size(&self) -> usize {
        self.components.len()
    }
}

fn cluster(notes: &[Note], threshold: f64, offset_truncation: f64) -> Vec<Chord> {
    let mut chords: Vec<Chord> = Vec::new();
    let mut latest = f64::NEG_INFINITY;
    for (i, note) in notes.iter().enumerate() {
        let component = ChordComponent {
            pitch: note.pitch,
            note: i,
            sustained: false,
        };
        match chords.last_mut() {
            Some(chord) if note.onset - latest <= threshold + ONSET_SLACK => chord.components.push(component),
            _ => chords.push(Chord {
                onset: note.onset,
                components: vec![component],
            }),
        }
        latest = note.onset;
    }
    let struck: Vec<Vec<ChordComponent>> = chords.iter().map(|c| c.components.clone()).collect();
    for (i, members) in struck.iter().enumerate() {
        for c in members {
            let offset = notes[c.note].offset;
            for j in i + 1..chords.len() {
                if offset - chords[j].onset <= offset_truncation {
                    break;
                }
                if struck[j].iter().any(|s| s.pitch == c.pitch) {
                    // key re-struck: the earlier note cannot still be held
                    break;
                }
                chords[j].components.push(ChordComponent {
                    sustained: true,
                    ..*c
                });
            }
        }
    }
    for chord in &mut chords {
        chord.components.sort_by_key(|c| (c.pitch, c.note));
    }
    chords
}

/// Clusters one hand part (canonical order) into chords. A note joins the
/// current chord when its onset is within `threshold` of the chord's latest
/// member; notes still sounding at a later chord's onset are added to it as
/// sustained members.
pub fn cluster_chords(notes: &[Note], threshold: f64, offset_truncation: f64) -> Result<Vec<Chord>> {
    let chords = cluster(notes, threshold, offset_truncation);
    if let Some(c) = chords.iter().find(|c| c.size() > MAX_CHORD_SIZE) {
        return Err(Error::HandOverflow {
            onset: c.onset,
            size: c.size(),
        });
    }
    Ok(chords)
}

/// Non-crossing assignments of distinct digits to the chord's pitches in
/// lexicographic order: ascending digits with pitch for the right hand,
/// descending for the left. `carried[k]`, when set, fixes component k.
pub fn enumerate_states(chord: &Chord, hand: Hand, carried: &[Option<u8>]) -> Vec<Vec<u8>> {
    let k = chord.size();
    if k > MAX_CHORD_SIZE {
        return Vec::new();
    }
    let mut states: Vec<Vec<u8>> = (1..=DIGITS as u8)
        .combinations(k)
        .map(|mut digits| {
            if hand == Hand::Left {
                digits.reverse();
            }
            digits
        })
        .filter(|digits| {
            carried
                .iter()
                .zip(digits)
                .all(|(fixed, d)| fixed.is_none_or(|f| f == *d))
        })
        .collect();
    states.sort();
    states
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordHandTables {
    pub prior: [f64; DIGITS],
    /// `across_fingers[from - 1][to - 1]` = P(to | from) between consecutive chords.
    pub across_fingers: [[f64; DIGITS]; DIGITS],
    pub within_fingers: [[f64; DIGITS]; DIGITS],
    pub across_outputs: PairTable,
    pub within_outputs: PairTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordDecoding {
    /// Digits per note of the hand part.
    pub digits: Vec<u8>,
    pub log_score: f64,
    /// Set when the sustained-finger constraint admitted no path and was dropped.
    pub constraint_relaxed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordHmmModel {
    params: ChordHmmParams,
    hands: [ChordHandTables; 2],
}

fn finger_table(counts: &[[u64; DIGITS]; DIGITS], eps: f64) -> [[f64; DIGITS]; DIGITS] {
    counts.map(|row| {
        let total = row.iter().sum::<u64>() as f64 + eps * DIGITS as f64;
        if total > 0.0 {
            row.map(|c| (c as f64 + eps) / total)
        } else {
            [1.0 / DIGITS as f64; DIGITS]
        }
    })
}

#[inline]
fn weighted(weight: f64, p: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * p.ln()
    }
}

impl ChordHmmModel {
    pub fn train(corpus: &[Piece], params: ChordHmmParams) -> Result<ChordHmmModel> {
        params.validate()?;
        let repr = PitchRepr::Lattice;
        let mut prior = [[0u64; DIGITS]; 2];
        let mut across = [[[0u64; DIGITS]; DIGITS]; 2];
        let mut within = [[[0u64; DIGITS]; DIGITS]; 2];
        let mut across_out: [PairCounts; 2] = std::array::from_fn(|_| PairCounts::new(repr, params.delta_p_max));
        let mut within_out: [PairCounts; 2] = std::array::from_fn(|_| PairCounts::new(repr, params.delta_p_max));
        let mut seen = 0usize;

        for piece in corpus {
            for hand in Hand::BOTH {
                let part = piece.hand_part(hand);
                if part.is_empty() {
                    continue;
                }
                let digits: Vec<u8> = part
                    .notes
                    .iter()
                    .map(|n| n.finger.map(|f| f.digit).ok_or(Error::MissingFinger { id: n.id }))
                    .collect::<Result<_>>()?;
                seen += digits.len();
                let h = hand.index();
                let chords = cluster(&part.notes, params.chord_threshold, params.offset_truncation);
                for c in &chords[0].components {
                    prior[h][digits[c.note] as usize - 1] += 1;
                }
                for (j, chord) in chords.iter().enumerate() {
                    for (a, b) in chord.components.iter().tuple_combinations() {
                        for (x, y) in [(a, b), (b, a)] {
                            let (fx, fy) = (digits[x.note], digits[y.note]);
                            within[h][fx as usize - 1][fy as usize - 1] += 1;
                            within_out[h].add(displacement(repr, x.pitch, y.pitch, params.delta_p_max), fx, fy);
                        }
                    }
                    if j == 0 {
                        continue;
                    }
                    for x in &chords[j - 1].components {
                        for y in &chord.components {
                            let (fx, fy) = (digits[x.note], digits[y.note]);
                            across[h][fx as usize - 1][fy as usize - 1] += 1;
                            across_out[h].add(displacement(repr, x.pitch, y.pitch, params.delta_p_max), fx, fy);
                        }
                    }
                }
            }
        }
        if seen == 0 {
            return Err(Error::EmptyCorpus);
        }

        let [ar, al] = across_out;
        let [wr, wl] = within_out;
        let (ar, al) = tie_hands(ar, al, params.symmetries);
        let (wr, wl) = tie_hands(wr, wl, params.symmetries);
        let across_tables = [ar, al];
        let within_tables = [wr, wl];
        let eps = params.smoothing_epsilon;
        let hands = std::array::from_fn(|h| {
            let prior_total = prior[h].iter().sum::<u64>() as f64 + eps * DIGITS as f64;
            ChordHandTables {
                prior: if prior_total > 0.0 {
                    prior[h].map(|c| (c as f64 + eps) / prior_total)
                } else {
                    [1.0 / DIGITS as f64; DIGITS]
                },
                across_fingers: finger_table(&across[h], eps),
                within_fingers: finger_table(&within[h], eps),
                across_outputs: PairTable::from_counts(&across_tables[h], eps),
                within_outputs: PairTable::from_counts(&within_tables[h], eps),
            }
        });
        Ok(ChordHmmModel { params, hands })
    }

    pub fn from_tables(params: ChordHmmParams, hands: [ChordHandTables; 2]) -> Result<ChordHmmModel> {
        params.validate()?;
        let alphabet = crate::pitch_space::DisplacementAlphabet::new(PitchRepr::Lattice, params.delta_p_max);
        for t in &hands {
            if *t.across_outputs.alphabet() != alphabet || *t.within_outputs.alphabet() != alphabet {
                return Err(Error::InvalidConfig("output tables do not match delta_p_max".into()));
            }
        }
        Ok(ChordHmmModel { params, hands })
    }

    pub fn params(&self) -> &ChordHmmParams {
        &self.params
    }

    pub fn tables(&self, hand: Hand) -> &ChordHandTables {
        &self.hands[hand.index()]
    }

    pub fn with_params(&self, params: ChordHmmParams) -> Result<ChordHmmModel> {
        params.validate()?;
        if params.delta_p_max != self.params.delta_p_max {
            return Err(Error::InvalidConfig("delta_p_max is fixed at training time".into()));
        }
        Ok(ChordHmmModel {
            params,
            hands: self.hands.clone(),
        })
    }

    pub fn cluster(&self, notes: &[Note]) -> Result<Vec<Chord>> {
        cluster_chords(notes, self.params.chord_threshold, self.params.offset_truncation)
    }

    fn disp(&self, from: u8, to: u8) -> crate::pitch_space::Displacement {
        displacement(PitchRepr::Lattice, from, to, self.params.delta_p_max)
    }

    fn within_score(&self, hand: Hand, chord: &Chord, state: &[u8]) -> f64 {
        let t = &self.hands[hand.index()];
        let mut s = 0.0;
        for (k1, a) in chord.components.iter().enumerate() {
            for (k2, b) in chord.components.iter().enumerate() {
                if k1 == k2 {
                    continue;
                }
                let (fa, fb) = (state[k1], state[k2]);
                s += weighted(self.params.beta2, t.within_fingers[fa as usize - 1][fb as usize - 1]);
                s += weighted(self.params.gamma2, t.within_outputs.prob(self.disp(a.pitch, b.pitch), fa, fb));
            }
        }
        s
    }

    fn across_score(&self, hand: Hand, prev: &Chord, prev_state: &[u8], chord: &Chord, state: &[u8]) -> f64 {
        let t = &self.hands[hand.index()];
        let mut s = 0.0;
        for (a, &fa) in prev.components.iter().zip(prev_state) {
            for (b, &fb) in chord.components.iter().zip(state) {
                s += weighted(self.params.beta1, t.across_fingers[fa as usize - 1][fb as usize - 1]);
                s += weighted(self.params.gamma1, t.across_outputs.prob(self.disp(a.pitch, b.pitch), fa, fb));
            }
        }
        s
    }

    fn chord_weight(&self, chord: &Chord) -> f64 {
        (chord.size() as f64).powf(-self.params.zeta)
    }

    /// Sustained members of `chord` must keep the digit they had in `prev`.
    fn sustain_consistent(prev: &Chord, prev_state: &[u8], chord: &Chord, state: &[u8]) -> bool {
        chord.components.iter().zip(state).all(|(c, d)| {
            !c.sustained
                || prev
                    .components
                    .iter()
                    .zip(prev_state)
                    .find(|(p, _)| p.note == c.note)
                    .is_none_or(|(_, pd)| pd == d)
        })
    }

    /// Per-chord weighted log contributions of a state path.
    pub fn path_contributions(&self, hand: Hand, chords: &[Chord], states: &[Vec<u8>]) -> Vec<f64> {
        let t = &self.hands[hand.index()];
        chords
            .iter()
            .enumerate()
            .map(|(j, chord)| {
                let state = &states[j];
                let mut raw = self.within_score(hand, chord, state);
                if j == 0 {
                    raw += state.iter().map(|&d| t.prior[d as usize - 1].ln()).sum::<f64>();
                } else {
                    if !Self::sustain_consistent(&chords[j - 1], &states[j - 1], chord, state) {
                        return f64::NEG_INFINITY;
                    }
                    raw += self.across_score(hand, &chords[j - 1], &states[j - 1], chord, state);
                }
                self.chord_weight(chord) * raw
            })
            .collect()
    }

    /// Most probable fingering of one hand part in canonical order.
    pub fn decode(&self, hand: Hand, notes: &[Note]) -> Result<ChordDecoding> {
        if notes.is_empty() {
            return Err(Error::EmptyPiece);
        }
        let chords = self.cluster(notes)?;
        self.decode_chords(hand, &chords, notes.len())
    }

    /// Viterbi over chord states; ties go to the lexicographically smallest
    /// sequence of assignments.
    pub fn decode_chords(&self, hand: Hand, chords: &[Chord], n_notes: usize) -> Result<ChordDecoding> {
        if chords.is_empty() {
            return Err(Error::EmptyPiece);
        }
        if let Some(c) = chords.iter().find(|c| c.size() > MAX_CHORD_SIZE) {
            return Err(Error::HandOverflow {
                onset: c.onset,
                size: c.size(),
            });
        }
        let states: Vec<Vec<Vec<u8>>> = chords
            .iter()
            .map(|c| enumerate_states(c, hand, &[]))
            .collect();
        let weights: Vec<f64> = chords.iter().map(|c| self.chord_weight(c)).collect();
        let within: Vec<Vec<f64>> = chords
            .iter()
            .zip(&states)
            .map(|(c, ss)| ss.iter().map(|s| self.within_score(hand, c, s)).collect())
            .collect();

        let run = |strict: bool| -> Option<(Vec<usize>, f64)> {
            let edge = |j: usize, a: usize, b: usize| -> f64 {
                if strict && !Self::sustain_consistent(&chords[j - 1], &states[j - 1][a], &chords[j], &states[j][b]) {
                    return f64::NEG_INFINITY;
                }
                weights[j]
                    * (self.across_score(hand, &chords[j - 1], &states[j - 1][a], &chords[j], &states[j][b])
                        + within[j][b])
            };
            let last = chords.len() - 1;
            let mut best: Vec<Vec<f64>> = states.iter().map(|s| vec![0.0; s.len()]).collect();
            for j in (0..last).rev() {
                for a in 0..states[j].len() {
                    let mut top = f64::NEG_INFINITY;
                    for b in 0..states[j + 1].len() {
                        let v = edge(j + 1, a, b) + best[j + 1][b];
                        if v > top {
                            top = v;
                        }
                    }
                    best[j][a] = top;
                }
            }
            let prior = &self.hands[hand.index()].prior;
            let mut total = f64::NEG_INFINITY;
            let mut current = 0;
            for (a, s) in states[0].iter().enumerate() {
                let start: f64 = s.iter().map(|&d| prior[d as usize - 1].ln()).sum();
                let v = weights[0] * (start + within[0][a]) + best[0][a];
                if v > total {
                    total = v;
                    current = a;
                }
            }
            if total == f64::NEG_INFINITY || total.is_nan() {
                return None;
            }
            let mut path = vec![current];
            for j in 1..chords.len() {
                let mut top = f64::NEG_INFINITY;
                let mut choice = 0;
                for b in 0..states[j].len() {
                    let v = edge(j, current, b) + best[j][b];
                    if v > top {
                        top = v;
                        choice = b;
                    }
                }
                path.push(choice);
                current = choice;
            }
            Some((path, total))
        };

        let (path, log_score, relaxed) = match run(true) {
            Some((p, s)) => (p, s, false),
            None => {
                let (p, s) = run(false).ok_or(Error::NoFeasiblePath)?;
                (p, s, true)
            }
        };
        let mut digits = vec![0u8; n_notes];
        for (j, chord) in chords.iter().enumerate() {
            for (c, &d) in chord.components.iter().zip(&states[j][path[j]]) {
                if !c.sustained {
                    digits[c.note] = d;
                }
            }
        }
        Ok(ChordDecoding {
            digits,
            log_score,
            constraint_relaxed: relaxed,
        })
    }
}

/// Right-hand convention check used by tests and reports: digits strictly
/// increase with pitch (decrease for the left hand).
pub fn is_non_crossing(hand: Hand, digits: &[u8]) -> bool {
    digits.windows(2).all(|w| match hand {
        Hand::Right => w[0] < w[1],
        Hand::Left => w[0] > w[1],
    })
}
