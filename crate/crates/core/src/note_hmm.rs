//! Note-level fingering HMMs of order 1 to 3.
//!
//! The hidden state is the finger of each note. Finger transitions follow an
//! order-`m` Markov chain whose maximum-likelihood estimates are smoothed by
//! linear interpolation with lower orders. The pitch of a note is scored by a
//! product of pairwise factors, one per lag `l = 1..m`, each a function of
//! the clamped displacement from the note `l` steps back and of the two
//! fingers involved, raised to a weight `alpha_l`.
//!
//! Decoding is exact: a max-product recursion over the last `m` digits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairwise::{pair_index, tie_hands, PairCounts, PairTable, Symmetries, DIGITS, PAIRS};
use crate::pig_io::{Hand, Note, Piece};
use crate::pitch_space::{displacement, PitchRepr, DEFAULT_DELTA_P_MAX};

pub const MAX_ORDER: usize = 3;
pub const DEFAULT_CHORD_THRESHOLD: f64 = 0.030;
pub const DEFAULT_SMOOTHING: f64 = 0.5;

/// Slack on the chord-onset gate so that onsets written with limited
/// precision still compare as intended.
const ONSET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteHmmConfig {
    pub order: usize,
    pub pitch_repr: PitchRepr,
    pub symmetries: Symmetries,
    pub delta_p_max: i32,
    /// Onset distance in seconds below which consecutive notes form a chord.
    pub chord_threshold: f64,
    pub chord_constraint: bool,
    /// Output weights, one per lag.
    pub alpha: Vec<f64>,
    /// Interpolation weights; `lambda[l - 1]` weights the order-`l` estimate.
    pub lambda: Vec<f64>,
    /// Additive count for output and initial distributions.
    pub smoothing_epsilon: f64,
}

impl NoteHmmConfig {
    /// Lattice representation, chord constraint on, transposition symmetry
    /// only, and the tuned coefficients published for each order.
    pub fn tuned(order: usize) -> NoteHmmConfig {
        let (alpha, lambda) = match order {
            1 => (vec![0.964], vec![]),
            2 => (vec![0.556, 0.407], vec![0.474]),
            _ => (vec![0.448, 0.292, 0.194], vec![0.470, 0.504]),
        };
        NoteHmmConfig {
            order: order.clamp(1, MAX_ORDER),
            pitch_repr: PitchRepr::Lattice,
            symmetries: Symmetries::NONE,
            delta_p_max: DEFAULT_DELTA_P_MAX,
            chord_threshold: DEFAULT_CHORD_THRESHOLD,
            chord_constraint: true,
            alpha,
            lambda,
            smoothing_epsilon: DEFAULT_SMOOTHING,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(1..=MAX_ORDER).contains(&self.order) {
            return bad(format!("order {} not in 1..={MAX_ORDER}", self.order));
        }
        if self.alpha.len() != self.order {
            return bad(format!("{} alpha weights for order {}", self.alpha.len(), self.order));
        }
        if self.lambda.len() != self.order - 1 {
            return bad(format!(
                "{} lambda weights for order {}",
                self.lambda.len(),
                self.order
            ));
        }
        if self.alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("alpha weights must be finite and non-negative".into());
        }
        if self.lambda.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return bad("lambda weights must lie in [0, 1]".into());
        }
        if self.lambda.iter().sum::<f64>() > 1.0 + 1e-12 {
            return bad("lambda weights sum above 1".into());
        }
        if !(self.smoothing_epsilon.is_finite() && self.smoothing_epsilon >= 0.0) {
            return bad("smoothing epsilon must be non-negative".into());
        }
        if self.delta_p_max < 1 {
            return bad("delta_p_max must be at least 1".into());
        }
        if !(self.chord_threshold.is_finite() && self.chord_threshold >= 0.0) {
            return bad("chord threshold must be non-negative".into());
        }
        Ok(())
    }
}

/// Probability tables for one hand.
#[derive(Debug, Clone, PartialEq)]
pub struct HandTables {
    pub initial: [f64; DIGITS],
    /// Maximum-likelihood transitions; `ml_transitions[l - 1]` is indexed by
    /// the base-5 code of the previous `l` digits (oldest most significant).
    pub ml_transitions: Vec<Vec<[f64; DIGITS]>>,
    /// Pairwise output factors; `outputs[l - 1]` is the lag-`l` table.
    pub outputs: Vec<PairTable>,
}

/// Base-5 code of a digit sequence (digits 1..=5, oldest first).
pub fn context_code(digits: &[u8]) -> usize {
    digits.iter().fold(0, |acc, &d| acc * DIGITS + (d as usize - 1))
}

fn pow5(k: usize) -> usize {
    DIGITS.pow(k as u32)
}

/// Inputs to the within-chord crossing test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keystroke {
    pub pitch: u8,
    pub onset: f64,
    pub digit: u8,
}

/// Whether two consecutive notes of one hand may take the given digits.
/// Notes further apart than `threshold` are unconstrained; within a chord the
/// fingers must not cross the pitch order, and distinct pitches need distinct
/// fingers.
pub fn chord_crossing_allowed(prev: Keystroke, cur: Keystroke, hand: Hand, threshold: f64) -> bool {
    if (cur.onset - prev.onset).abs() > threshold + ONSET_SLACK {
        return true;
    }
    digit_order_allowed(prev.pitch, prev.digit, cur.pitch, cur.digit, hand)
}

fn digit_order_allowed(prev_pitch: u8, prev_digit: u8, pitch: u8, digit: u8, hand: Hand) -> bool {
    use std::cmp::Ordering::*;
    let digit_order = match hand {
        Hand::Right => digit.cmp(&prev_digit),
        Hand::Left => prev_digit.cmp(&digit),
    };
    match pitch.cmp(&prev_pitch) {
        Equal => true,
        Greater => digit_order == Greater,
        Less => digit_order == Less,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoding {
    /// Digits 1..=5 in input order.
    pub digits: Vec<u8>,
    pub log_score: f64,
    /// Set when no path satisfied the chord constraint and it was dropped.
    pub constraint_relaxed: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Derived {
    initial_log: [f64; DIGITS],
    /// `smoothed_log[h - 1][ctx][next]` for history length h.
    smoothed_log: Vec<Vec<[f64; DIGITS]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoteHmmModel {
    config: NoteHmmConfig,
    hands: [HandTables; 2],
    derived: [Derived; 2],
}

impl NoteHmmModel {
    /// Maximum-likelihood training on annotated pieces; each piece is split
    /// into hand parts in canonical order.
    pub fn train(corpus: &[Piece], config: NoteHmmConfig) -> Result<NoteHmmModel> {
        config.validate()?;
        let m = config.order;
        let mut initial = [[0u64; DIGITS]; 2];
        let mut transitions: [Vec<Vec<[u64; DIGITS]>>; 2] =
            std::array::from_fn(|_| (1..=m).map(|l| vec![[0; DIGITS]; pow5(l)]).collect());
        let mut outputs: [Vec<PairCounts>; 2] = std::array::from_fn(|_| {
            (0..m)
                .map(|_| PairCounts::new(config.pitch_repr, config.delta_p_max))
                .collect()
        });

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
                let pitches: Vec<u8> = part.notes.iter().map(|n| n.pitch).collect();
                let h = hand.index();
                seen += digits.len();
                initial[h][digits[0] as usize - 1] += 1;
                for n in 1..digits.len() {
                    for l in 1..=m.min(n) {
                        let ctx = context_code(&digits[n - l..n]);
                        transitions[h][l - 1][ctx][digits[n] as usize - 1] += 1;
                        let d = displacement(config.pitch_repr, pitches[n - l], pitches[n], config.delta_p_max);
                        outputs[h][l - 1].add(d, digits[n - l], digits[n]);
                    }
                }
            }
        }
        if seen == 0 {
            return Err(Error::EmptyCorpus);
        }

        let [right_out, left_out] = outputs;
        let mut tied: [Vec<PairCounts>; 2] = [Vec::new(), Vec::new()];
        for (r, l) in right_out.into_iter().zip(left_out) {
            let (r, l) = tie_hands(r, l, config.symmetries);
            tied[0].push(r);
            tied[1].push(l);
        }

        let eps = config.smoothing_epsilon;
        let hands = std::array::from_fn(|h| HandTables {
            initial: smoothed_distribution(&initial[h], eps),
            ml_transitions: transitions[h]
                .iter()
                .map(|table| table.iter().map(|row| smoothed_distribution(row, 0.0)).collect())
                .collect(),
            outputs: tied[h].iter().map(|c| PairTable::from_counts(c, eps)).collect(),
        });
        Ok(NoteHmmModel::assemble(config, hands))
    }

    /// Builds a model from explicit per-hand tables, `[right, left]`.
    pub fn from_tables(config: NoteHmmConfig, hands: [HandTables; 2]) -> Result<NoteHmmModel> {
        config.validate()?;
        let m = config.order;
        for t in &hands {
            let shapes_ok = t.ml_transitions.len() == m
                && t.ml_transitions.iter().enumerate().all(|(i, tab)| tab.len() == pow5(i + 1))
                && t.outputs.len() == m
                && t.outputs.iter().all(|o| {
                    o.alphabet().repr() == config.pitch_repr
                        && *o.alphabet() == crate::pitch_space::DisplacementAlphabet::new(config.pitch_repr, config.delta_p_max)
                });
            if !shapes_ok {
                return Err(Error::InvalidConfig("table shapes do not match the configuration".into()));
            }
            let probs = t
                .initial
                .iter()
                .chain(t.ml_transitions.iter().flatten().flatten());
            for p in probs {
                if !(p.is_finite() && *p >= 0.0) {
                    return Err(Error::InvalidConfig("probabilities must be finite and non-negative".into()));
                }
            }
        }
        Ok(NoteHmmModel::assemble(config, hands))
    }

    fn assemble(config: NoteHmmConfig, hands: [HandTables; 2]) -> NoteHmmModel {
        let derived = std::array::from_fn(|h| derive(&config, &hands[h]));
        NoteHmmModel {
            config,
            hands,
            derived,
        }
    }

    pub fn config(&self) -> &NoteHmmConfig {
        &self.config
    }

    pub fn tables(&self, hand: Hand) -> &HandTables {
        &self.hands[hand.index()]
    }

    /// Replaces the output weights and interpolation coefficients without
    /// retraining; the counts do not depend on them.
    pub fn with_coefficients(&self, alpha: Vec<f64>, lambda: Vec<f64>) -> Result<NoteHmmModel> {
        let config = NoteHmmConfig {
            alpha,
            lambda,
            ..self.config.clone()
        };
        config.validate()?;
        Ok(NoteHmmModel::assemble(config, self.hands.clone()))
    }

    pub fn with_chord_constraint(&self, enabled: bool) -> NoteHmmModel {
        let mut model = self.clone();
        model.config.chord_constraint = enabled;
        model
    }

    pub fn initial_prob(&self, hand: Hand, digit: u8) -> f64 {
        self.hands[hand.index()].initial[digit as usize - 1]
    }

    /// Interpolated transition probability of `next` after `context`
    /// (oldest digit first). Contexts shorter than the order use the
    /// interpolation truncated to their length.
    pub fn transition_prob(&self, hand: Hand, context: &[u8], next: u8) -> f64 {
        let h = context.len();
        assert!((1..=self.config.order).contains(&h), "context length {h}");
        interpolated(&self.config.lambda, &self.hands[hand.index()].ml_transitions, context, next)
    }

    /// `prod_l F_l(p_n - p_{n-l}; f_{n-l}, f_n)^alpha_l` for a window of
    /// pitches and digits ending at the current note.
    pub fn output_score(&self, hand: Hand, pitches: &[u8], digits: &[u8]) -> f64 {
        assert_eq!(pitches.len(), digits.len());
        let n = pitches.len() - 1;
        let tables = &self.hands[hand.index()];
        let mut score = 1.0;
        for l in 1..=n.min(self.config.order) {
            let alpha = self.config.alpha[l - 1];
            if alpha == 0.0 {
                continue;
            }
            let d = displacement(self.config.pitch_repr, pitches[n - l], pitches[n], self.config.delta_p_max);
            score *= tables.outputs[l - 1].prob(d, digits[n - l], digits[n]).powf(alpha);
        }
        score
    }

    /// Unnormalized log-score of a complete fingering, the quantity maximized
    /// by [`NoteHmmModel::decode`]. Forbidden chord crossings give `-inf` when
    /// the constraint is enabled.
    pub fn log_score(&self, hand: Hand, notes: &[Note], digits: &[u8]) -> f64 {
        assert_eq!(notes.len(), digits.len());
        if notes.is_empty() {
            return 0.0;
        }
        let m = self.config.order;
        let pitches: Vec<u8> = notes.iter().map(|n| n.pitch).collect();
        let mut total = self.initial_prob(hand, digits[0]).ln();
        for n in 1..notes.len() {
            let h = n.min(m);
            if self.config.chord_constraint {
                let prev = Keystroke { pitch: notes[n - 1].pitch, onset: notes[n - 1].onset, digit: digits[n - 1] };
                let cur = Keystroke { pitch: notes[n].pitch, onset: notes[n].onset, digit: digits[n] };
                if !chord_crossing_allowed(prev, cur, hand, self.config.chord_threshold) {
                    return f64::NEG_INFINITY;
                }
            }
            total += self.transition_prob(hand, &digits[n - h..n], digits[n]).ln();
            for l in 1..=h {
                let alpha = self.config.alpha[l - 1];
                if alpha > 0.0 {
                    let d = displacement(self.config.pitch_repr, pitches[n - l], pitches[n], self.config.delta_p_max);
                    total += alpha * self.hands[hand.index()].outputs[l - 1].prob(d, digits[n - l], digits[n]).ln();
                }
            }
        }
        total
    }

    /// Most probable fingering of one hand part given in canonical order.
    /// Ties go to the lexicographically smallest digit sequence. If the chord
    /// constraint admits no path, decoding is repeated without it.
    pub fn decode(&self, hand: Hand, notes: &[Note]) -> Result<Decoding> {
        if notes.is_empty() {
            return Err(Error::EmptyPiece);
        }
        if let Some(d) = self.viterbi(hand, notes, self.config.chord_constraint) {
            return Ok(d);
        }
        if self.config.chord_constraint {
            if let Some(mut d) = self.viterbi(hand, notes, false) {
                d.constraint_relaxed = true;
                return Ok(d);
            }
        }
        Err(Error::NoFeasiblePath)
    }

    fn viterbi(&self, hand: Hand, notes: &[Note], constrained: bool) -> Option<Decoding> {
        let m = self.config.order;
        let n_notes = notes.len();
        let tables = &self.hands[hand.index()];
        let derived = &self.derived[hand.index()];

        // emit[n][l - 1][pair]: alpha-weighted log factor of lag l at note n.
        let emit: Vec<Vec<[f64; PAIRS]>> = (0..n_notes)
            .map(|n| {
                (1..=n.min(m))
                    .map(|l| {
                        let mut row = [0.0; PAIRS];
                        let alpha = self.config.alpha[l - 1];
                        if alpha > 0.0 {
                            let d = displacement(
                                self.config.pitch_repr,
                                notes[n - l].pitch,
                                notes[n].pitch,
                                self.config.delta_p_max,
                            );
                            let table = &tables.outputs[l - 1];
                            let cell = table.alphabet().index(d).expect("clamped");
                            for (pair, v) in row.iter_mut().enumerate() {
                                *v = alpha * table.log_prob_at(cell, pair);
                            }
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        let allowed: Vec<[bool; PAIRS]> = (0..n_notes)
            .map(|n| {
                let mut row = [true; PAIRS];
                if constrained && n > 0 {
                    let (prev, cur) = (&notes[n - 1], &notes[n]);
                    if (cur.onset - prev.onset).abs() <= self.config.chord_threshold + ONSET_SLACK {
                        for a in 1..=5u8 {
                            for b in 1..=5u8 {
                                row[pair_index(a, b)] = digit_order_allowed(prev.pitch, a, cur.pitch, b, hand);
                            }
                        }
                    }
                }
                row
            })
            .collect();

        // State at note n: the last min(n + 1, m) digits as a base-5 code.
        let width = |n: usize| (n + 1).min(m);
        let step = |n: usize, state: usize, d: usize| -> (f64, usize) {
            // transition into note n (n >= 1) from `state` at note n - 1
            let h = n.min(m);
            let mut score = derived.smoothed_log[h - 1][state][d];
            let mut rest = state;
            for row in &emit[n] {
                let prev_digit = rest % DIGITS;
                rest /= DIGITS;
                score += row[prev_digit * DIGITS + d];
            }
            if !allowed[n][(state % DIGITS) * DIGITS + d] {
                score = f64::NEG_INFINITY;
            }
            let next = if h < m { state * DIGITS + d } else { (state % pow5(m - 1)) * DIGITS + d };
            (score, next)
        };

        // Backward pass: best[n][s] is the best score of notes n+1.. given state s at n.
        let mut best: Vec<Vec<f64>> = (0..n_notes).map(|n| vec![0.0; pow5(width(n))]).collect();
        for n in (0..n_notes - 1).rev() {
            let (head, tail) = best.split_at_mut(n + 1);
            let future = &tail[0];
            for (state, slot) in head[n].iter_mut().enumerate() {
                let mut top = f64::NEG_INFINITY;
                for d in 0..DIGITS {
                    let (s, next) = step(n + 1, state, d);
                    let v = s + future[next];
                    if v > top {
                        top = v;
                    }
                }
                *slot = top;
            }
        }

        // Forward reconstruction, taking the smallest digit among maximizers.
        let mut state = 0;
        let mut total = f64::NEG_INFINITY;
        for d in 0..DIGITS {
            let v = derived.initial_log[d] + best[0][d];
            if v > total {
                total = v;
                state = d;
            }
        }
        if total == f64::NEG_INFINITY || total.is_nan() {
            return None;
        }
        let mut digits = Vec::with_capacity(n_notes);
        digits.push(state as u8 + 1);
        for n in 1..n_notes {
            let mut top = f64::NEG_INFINITY;
            let mut choice = (0, 0);
            for d in 0..DIGITS {
                let (s, next) = step(n, state, d);
                let v = s + best[n][next];
                if v > top {
                    top = v;
                    choice = (d, next);
                }
            }
            digits.push(choice.0 as u8 + 1);
            state = choice.1;
        }
        Some(Decoding {
            digits,
            log_score: total,
            constraint_relaxed: false,
        })
    }
}

/// Normalized distribution from counts with additive smoothing; uniform when
/// there is no mass at all.
fn smoothed_distribution(counts: &[u64; DIGITS], eps: f64) -> [f64; DIGITS] {
    let total = counts.iter().sum::<u64>() as f64 + eps * DIGITS as f64;
    if total <= 0.0 {
        return [1.0 / DIGITS as f64; DIGITS];
    }
    counts.map(|c| (c as f64 + eps) / total)
}

/// Interpolated estimate for a context of length h:
/// `(1 - sum_{l<h} lambda_l) P_ML^h + sum_{l<h} lambda_l P_ML^l`.
fn interpolated(lambda: &[f64], ml: &[Vec<[f64; DIGITS]>], context: &[u8], next: u8) -> f64 {
    let h = context.len();
    let d = next as usize - 1;
    let lower: f64 = lambda[..h - 1].iter().sum();
    let mut p = (1.0 - lower) * ml[h - 1][context_code(context)][d];
    for l in 1..h {
        p += lambda[l - 1] * ml[l - 1][context_code(&context[h - l..])][d];
    }
    p
}

fn derive(config: &NoteHmmConfig, tables: &HandTables) -> Derived {
    let m = config.order;
    let smoothed_log = (1..=m)
        .map(|h| {
            (0..pow5(h))
                .map(|code| {
                    let context = decode_context(code, h);
                    let mut row = [0.0; DIGITS];
                    for (d, v) in row.iter_mut().enumerate() {
                        *v = interpolated(&config.lambda, &tables.ml_transitions, &context, d as u8 + 1).ln();
                    }
                    row
                })
                .collect()
        })
        .collect();
    Derived {
        initial_log: tables.initial.map(f64::ln),
        smoothed_log,
    }
}

/// Inverse of [`context_code`].
pub fn decode_context(mut code: usize, len: usize) -> Vec<u8> {
    let mut digits = vec![0u8; len];
    for slot in digits.iter_mut().rev() {
        *slot = (code % DIGITS) as u8 + 1;
        code /= DIGITS;
    }
    digits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pig_io::{parse_fingering_file, FingerLabel};

    fn piece(lines: &str) -> Piece {
        parse_fingering_file(lines).unwrap()
    }

    fn rh_notes(pitches: &[u8], fingers: &[u8]) -> Piece {
        let notes = pitches
            .iter()
            .zip(fingers)
            .enumerate()
            .map(|(i, (&p, &f))| Note {
                id: i,
                onset: i as f64 * 0.25,
                offset: i as f64 * 0.25 + 0.2,
                pitch: p,
                spelling: crate::pig_io::spell_midi(p),
                onset_velocity: 64,
                offset_velocity: 64,
                hand: Hand::Right,
                finger: FingerLabel::new(Hand::Right, f),
            })
            .collect();
        Piece::new("t", notes)
    }

    #[test]
    fn single_path_counts() {
        let corpus = [rh_notes(&[60, 62, 64], &[1, 2, 3])];
        let model = NoteHmmModel::train(&corpus, NoteHmmConfig::tuned(1)).unwrap();
        let t = model.tables(Hand::Right);
        assert_eq!(t.ml_transitions[0][context_code(&[1])][1], 1.0);
        assert_eq!(t.ml_transitions[0][context_code(&[2])][2], 1.0);
        assert_eq!(model.transition_prob(Hand::Right, &[1], 2), 1.0);
        // unseen context falls back to uniform
        assert_eq!(model.transition_prob(Hand::Right, &[5], 3), 0.2);
    }

    #[test]
    fn interpolation_formula() {
        let mut ml2 = vec![[0.0; DIGITS]; 25];
        let mut ml1 = vec![[0.0; DIGITS]; 5];
        ml2[context_code(&[1, 2])] = [0.0, 0.5, 0.0, 0.5, 0.0];
        ml1[context_code(&[2])] = [0.1, 0.1, 0.4, 0.2, 0.2];
        let p = interpolated(&[0.5], &[ml1.clone(), ml2.clone()], &[1, 2], 3);
        assert!((p - 0.2).abs() < 1e-15);
        let p = interpolated(&[0.0], &[ml1, ml2], &[1, 2], 3);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn unseen_full_context_is_positive() {
        let corpus = [rh_notes(&[60, 62, 64, 65, 67], &[1, 2, 3, 1, 2])];
        let model = NoteHmmModel::train(&corpus, NoteHmmConfig::tuned(2)).unwrap();
        // (5, 1) never occurs, but 1 -> 2 does
        assert!(model.transition_prob(Hand::Right, &[5, 1], 2) > 0.0);
        for ctx in [[1u8, 2], [5, 5], [3, 1]] {
            let s: f64 = (1..=5).map(|d| model.transition_prob(Hand::Right, &ctx, d)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn output_score_weights() {
        let corpus = [rh_notes(&[60, 62, 64, 65, 67], &[1, 2, 3, 1, 2])];
        let mut config = NoteHmmConfig::tuned(2);
        config.alpha = vec![0.0, 0.0];
        let model = NoteHmmModel::train(&corpus, config).unwrap();
        assert_eq!(model.output_score(Hand::Right, &[60, 70, 61], &[1, 4, 2]), 1.0);

        let model = model.with_coefficients(vec![1.0, 0.0], vec![0.3]).unwrap();
        let f = model.tables(Hand::Right).outputs[0].prob(
            displacement(PitchRepr::Lattice, 60, 62, 15),
            1,
            2,
        );
        assert_eq!(model.output_score(Hand::Right, &[60, 62], &[1, 2]), f);
    }

    #[test]
    fn crossing_rules() {
        let k = |pitch, onset, digit| Keystroke { pitch, onset, digit };
        assert!(!chord_crossing_allowed(k(60, 0.0, 3), k(64, 0.0, 1), Hand::Right, 0.03));
        assert!(chord_crossing_allowed(k(60, 0.0, 3), k(64, 0.5, 1), Hand::Right, 0.03));
        assert!(chord_crossing_allowed(k(48, 0.0, 5), k(55, 0.0, 1), Hand::Left, 0.03));
        assert!(!chord_crossing_allowed(k(48, 0.0, 1), k(55, 0.0, 5), Hand::Left, 0.03));
        assert!(!chord_crossing_allowed(k(60, 0.0, 2), k(64, 0.01, 2), Hand::Right, 0.03));
        assert!(chord_crossing_allowed(k(60, 0.0, 2), k(60, 0.0, 2), Hand::Right, 0.03));
        assert!(chord_crossing_allowed(k(60, 0.0, 1), k(64, 0.03, 3), Hand::Right, 0.03));
    }

    #[test]
    fn single_note_takes_most_likely_initial_digit() {
        let corpus = [
            rh_notes(&[60, 62], &[3, 4]),
            rh_notes(&[60, 62], &[3, 4]),
            rh_notes(&[60, 62], &[2, 3]),
        ];
        let model = NoteHmmModel::train(&corpus, NoteHmmConfig::tuned(1)).unwrap();
        let d = model.decode(Hand::Right, &rh_notes(&[70], &[1]).notes).unwrap();
        assert_eq!(d.digits, vec![3]);

        // equal initial mass everywhere: smallest digit wins
        let uniform = rh_notes(&[60, 62, 64, 65, 67], &[1, 2, 3, 4, 5]);
        let mut config = NoteHmmConfig::tuned(1);
        config.smoothing_epsilon = 1e9;
        let model = NoteHmmModel::train(&[uniform], config).unwrap();
        let d = model.decode(Hand::Right, &rh_notes(&[70], &[1]).notes).unwrap();
        assert_eq!(d.digits, vec![1]);
    }

    #[test]
    fn empty_input_is_rejected() {
        let corpus = [rh_notes(&[60, 62], &[1, 2])];
        let model = NoteHmmModel::train(&corpus, NoteHmmConfig::tuned(1)).unwrap();
        assert!(matches!(model.decode(Hand::Right, &[]), Err(Error::EmptyPiece)));
        assert!(matches!(
            NoteHmmModel::train(&[], NoteHmmConfig::tuned(1)),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn six_note_cluster_relaxes_constraint() {
        let text = "0 0.0 1 C4 64 64 0 1\n1 0.0 1 D4 64 64 0 2\n2 0.0 1 E4 64 64 0 3\n\
                    3 0.0 1 F4 64 64 0 4\n4 0.0 1 G4 64 64 0 5\n5 0.0 1 A4 64 64 0 5\n";
        let p = piece(text);
        let model = NoteHmmModel::train(std::slice::from_ref(&p), NoteHmmConfig::tuned(2)).unwrap();
        let d = model.decode(Hand::Right, &p.hand_part(Hand::Right).notes).unwrap();
        assert!(d.constraint_relaxed);
        let five = piece(&text.lines().take(5).collect::<Vec<_>>().join("\n"));
        let d = model.decode(Hand::Right, &five.hand_part(Hand::Right).notes).unwrap();
        assert!(!d.constraint_relaxed);
        assert_eq!(d.digits, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn config_validation() {
        let mut c = NoteHmmConfig::tuned(3);
        assert!(c.validate().is_ok());
        c.lambda = vec![0.6, 0.6];
        assert!(c.validate().is_err());
        let mut c = NoteHmmConfig::tuned(2);
        c.alpha.push(1.0);
        assert!(c.validate().is_err());
        let mut c = NoteHmmConfig::tuned(1);
        c.order = 4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn context_codes_round_trip() {
        for len in 1..=3 {
            for code in 0..pow5(len) {
                assert_eq!(context_code(&decode_context(code, len)), code);
            }
        }
    }
}
