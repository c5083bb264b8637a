//! Random instances and brute-force oracles shared by the integration tests.
//! The oracles recompute every score from the public tables instead of
//! calling the scoring code under test.
#![allow(dead_code)]

use fingering::chord_hmm::{Chord, ChordHandTables, ChordHmmModel, ChordHmmParams};
use fingering::eval_measures::{Cost, RecombinationConfig};
use fingering::note_hmm::{context_code, HandTables, NoteHmmConfig, NoteHmmModel};
use fingering::pairwise::{PairTable, DIGITS, PAIRS};
use fingering::pig_io::{spell_midi, FingerLabel, Hand, Note, Piece};
use fingering::pitch_space::{displacement, DisplacementAlphabet, PitchRepr};
use fingering::Symmetries;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random distribution over `n` outcomes, or the uniform one.
pub fn distribution(rng: &mut impl Rng, n: usize, uniform: bool) -> Vec<f64> {
    if uniform {
        return vec![1.0 / n as f64; n];
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn digit_row(rng: &mut impl Rng, uniform: bool) -> [f64; DIGITS] {
    distribution(rng, DIGITS, uniform).try_into().unwrap()
}

fn random_pair_table(rng: &mut impl Rng, alphabet: &DisplacementAlphabet, uniform: bool) -> PairTable {
    let probs: Vec<f64> = (0..PAIRS).flat_map(|_| distribution(rng, alphabet.len(), uniform)).collect();
    PairTable::from_probs(alphabet.clone(), probs)
}

pub struct NoteCase {
    pub model: NoteHmmModel,
    pub hand: Hand,
    pub notes: Vec<Note>,
}

pub fn note(id: usize, onset: f64, offset: f64, pitch: u8, hand: Hand) -> Note {
    Note {
        id,
        onset,
        offset,
        pitch,
        spelling: spell_midi(pitch),
        onset_velocity: 64,
        offset_velocity: 64,
        hand,
        finger: None,
    }
}

/// Random model with random (or, with `uniform`, flat) tables.
pub fn random_note_model(rng: &mut impl Rng, order: usize, uniform: bool) -> NoteHmmModel {
    let repr = if rng.gen_bool(0.5) { PitchRepr::Lattice } else { PitchRepr::Integral };
    let delta_p_max = rng.gen_range(2..=8);
    let alphabet = DisplacementAlphabet::new(repr, delta_p_max);
    let alpha: Vec<f64> = (0..order)
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.1..1.5) })
        .collect();
    let mut lambda: Vec<f64> = (1..order).map(|_| rng.gen_range(0.0..0.6)).collect();
    let s: f64 = lambda.iter().sum();
    if s > 1.0 {
        lambda.iter_mut().for_each(|l| *l /= s * 1.01);
    }
    let config = NoteHmmConfig {
        order,
        pitch_repr: repr,
        symmetries: Symmetries::NONE,
        delta_p_max,
        chord_threshold: 0.030,
        chord_constraint: rng.gen_bool(0.5),
        alpha,
        lambda,
        smoothing_epsilon: 0.5,
    };
    let hands = std::array::from_fn(|_| HandTables {
        initial: digit_row(rng, uniform),
        ml_transitions: (1..=order)
            .map(|l| (0..DIGITS.pow(l as u32)).map(|_| digit_row(rng, uniform)).collect())
            .collect(),
        outputs: (0..order).map(|_| random_pair_table(rng, &alphabet, uniform)).collect(),
    });
    NoteHmmModel::from_tables(config, hands).unwrap()
}

/// Random hand part whose onset gaps straddle the 30 ms chord gate.
pub fn random_notes(rng: &mut impl Rng, n: usize, hand: Hand, pitches: (u8, u8)) -> Vec<Note> {
    let gaps = [0.0, 0.0, 0.01, 0.03, 0.0301, 0.2, 0.5];
    let mut t = 0.0;
    (0..n)
        .map(|i| {
            if i > 0 {
                t += gaps.choose(rng).unwrap();
            }
            let pitch = rng.gen_range(pitches.0..=pitches.1);
            note(i, t, t + 0.25, pitch, hand)
        })
        .collect()
}

pub fn random_note_case(rng: &mut impl Rng, max_len: usize) -> NoteCase {
    let order = rng.gen_range(1..=3);
    let uniform = rng.gen_bool(0.1);
    let model = random_note_model(rng, order, uniform);
    let hand = if rng.gen_bool(0.5) { Hand::Right } else { Hand::Left };
    let n = rng.gen_range(1..=max_len);
    let notes = random_notes(rng, n, hand, (55, 70));
    NoteCase { model, hand, notes }
}

fn interpolated(lambda: &[f64], t: &HandTables, context: &[u8], next: u8) -> f64 {
    let h = context.len();
    let top = 1.0 - lambda[..h - 1].iter().sum::<f64>();
    let mut p = top * t.ml_transitions[h - 1][context_code(context)][next as usize - 1];
    for l in 1..h {
        p += lambda[l - 1] * t.ml_transitions[l - 1][context_code(&context[h - l..])][next as usize - 1];
    }
    p
}

fn crossing_ok(hand: Hand, a: &Note, da: u8, b: &Note, db: u8) -> bool {
    if (b.onset - a.onset).abs() > 0.030 + 1e-9 || a.pitch == b.pitch {
        return true;
    }
    let up = b.pitch > a.pitch;
    match hand {
        Hand::Right => (db > da) == up && da != db,
        Hand::Left => (db < da) == up && da != db,
    }
}

/// Log-score of one fingering recomputed from the tables.
pub fn oracle_note_score(model: &NoteHmmModel, hand: Hand, notes: &[Note], digits: &[u8], constrained: bool) -> f64 {
    let c = model.config();
    let t = model.tables(hand);
    let mut s = t.initial[digits[0] as usize - 1].ln();
    for n in 1..notes.len() {
        if constrained && !crossing_ok(hand, &notes[n - 1], digits[n - 1], &notes[n], digits[n]) {
            return f64::NEG_INFINITY;
        }
        let h = n.min(c.order);
        s += interpolated(&c.lambda, t, &digits[n - h..n], digits[n]).ln();
        for l in 1..=h {
            if c.alpha[l - 1] != 0.0 {
                let d = displacement(c.pitch_repr, notes[n - l].pitch, notes[n].pitch, c.delta_p_max);
                s += c.alpha[l - 1] * t.outputs[l - 1].prob(d, digits[n - l], digits[n]).ln();
            }
        }
    }
    s
}

/// Every digit sequence of length `n` in lexicographic order.
pub fn all_sequences(n: usize, base: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..base.pow(n as u32)).map(move |mut code| {
        let mut v = vec![0u8; n];
        for slot in v.iter_mut().rev() {
            *slot = (code % base) as u8 + 1;
            code /= base;
        }
        v
    })
}

/// Exhaustive argmax with the lexicographic tie rule and the relaxation
/// fallback: (digits, score, relaxed).
pub fn brute_force_decode(model: &NoteHmmModel, hand: Hand, notes: &[Note]) -> (Vec<u8>, f64, bool) {
    let search = |constrained: bool| {
        let mut best: Option<(Vec<u8>, f64)> = None;
        for seq in all_sequences(notes.len(), DIGITS) {
            let s = oracle_note_score(model, hand, notes, &seq, constrained);
            if s > f64::NEG_INFINITY && best.as_ref().is_none_or(|b| s > b.1) {
                best = Some((seq, s));
            }
        }
        best
    };
    if model.config().chord_constraint {
        if let Some((d, s)) = search(true) {
            return (d, s, false);
        }
        let (d, s) = search(false).unwrap();
        (d, s, true)
    } else {
        let (d, s) = search(false).unwrap();
        (d, s, false)
    }
}

/// Brute-force recombination: (cost, lexicographically smallest optimal path).
pub fn brute_force_recombination(est: &[u8], gts: &[Vec<u8>], cfg: &RecombinationConfig) -> (f64, Vec<usize>) {
    let value = |c: Cost| match c {
        Cost::Finite(v) => v,
        Cost::Infinite => f64::INFINITY,
    };
    let mut best = (f64::INFINITY, Vec::new());
    for seq in all_sequences(est.len(), gts.len()) {
        let z: Vec<usize> = seq.iter().map(|&g| g as usize - 1).collect();
        let mut cost = 0.0;
        for n in 0..est.len() {
            if gts[z[n]][n] != est[n] {
                cost += cfg.sub;
            }
            if n > 0 && z[n] != z[n - 1] {
                cost += if gts[z[n]][n] == gts[z[n - 1]][n] { value(cfg.rec) } else { value(cfg.rec_mismatch) };
            }
        }
        if cost < best.0 {
            best = (cost, z);
        }
    }
    best
}

pub fn random_cost(rng: &mut impl Rng) -> Cost {
    // dyadic values keep every sum exact
    *[
        Cost::Finite(0.0),
        Cost::Finite(0.5),
        Cost::Finite(1.0),
        Cost::Finite(1.5),
        Cost::Finite(2.0),
        Cost::Infinite,
        Cost::Infinite,
    ]
    .choose(rng)
    .unwrap()
}

pub fn random_sequences(rng: &mut impl Rng, ng: usize, n: usize, symbols: u8) -> (Vec<u8>, Vec<Vec<u8>>) {
    let est = (0..n).map(|_| rng.gen_range(1..=symbols)).collect();
    let gts = (0..ng).map(|_| (0..n).map(|_| rng.gen_range(1..=symbols)).collect()).collect();
    (est, gts)
}

/// Non-crossing distinct-digit assignments by filtering all 5^K tuples.
pub fn brute_force_states(k: usize, hand: Hand, carried: &[Option<u8>]) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = all_sequences(k, DIGITS)
        .filter(|s| {
            s.windows(2).all(|w| match hand {
                Hand::Right => w[0] < w[1],
                Hand::Left => w[0] > w[1],
            })
        })
        .filter(|s| carried.iter().zip(s).all(|(c, d)| c.is_none_or(|c| c == *d)))
        .collect();
    out.sort();
    out
}

pub fn random_chord_model(rng: &mut impl Rng) -> ChordHmmModel {
    let params = ChordHmmParams {
        beta1: rng.gen_range(0.0..3.0),
        beta2: rng.gen_range(0.0..3.0),
        gamma1: rng.gen_range(0.0..3.0),
        gamma2: rng.gen_range(0.0..3.0),
        zeta: rng.gen_range(0.0..1.0),
        delta_p_max: rng.gen_range(2..=8),
        ..ChordHmmParams::default()
    };
    let alphabet = DisplacementAlphabet::new(PitchRepr::Lattice, params.delta_p_max);
    let square = |rng: &mut ChaCha8Rng| -> [[f64; DIGITS]; DIGITS] { std::array::from_fn(|_| digit_row(rng, false)) };
    let mut inner = ChaCha8Rng::seed_from_u64(rng.gen());
    let hands = std::array::from_fn(|_| ChordHandTables {
        prior: digit_row(&mut inner, false),
        across_fingers: square(&mut inner),
        within_fingers: square(&mut inner),
        across_outputs: random_pair_table(&mut inner, &alphabet, false),
        within_outputs: random_pair_table(&mut inner, &alphabet, false),
    });
    ChordHmmModel::from_tables(params, hands).unwrap()
}

/// Chord-model score of a state path recomputed from the tables;
/// `-inf` when a sustained note changes finger.
pub fn oracle_chord_score(model: &ChordHmmModel, hand: Hand, chords: &[Chord], states: &[Vec<u8>], strict: bool) -> f64 {
    let p = model.params();
    let t = model.tables(hand);
    let w = |weight: f64, prob: f64| if weight == 0.0 { 0.0 } else { weight * prob.ln() };
    let disp = |a: u8, b: u8| displacement(PitchRepr::Lattice, a, b, p.delta_p_max);
    let mut total = 0.0;
    for (j, chord) in chords.iter().enumerate() {
        let st = &states[j];
        let mut raw = 0.0;
        for (x, a) in chord.components.iter().enumerate() {
            for (y, b) in chord.components.iter().enumerate() {
                if x != y {
                    let (fa, fb) = (st[x], st[y]);
                    raw += w(p.beta2, t.within_fingers[fa as usize - 1][fb as usize - 1]);
                    raw += w(p.gamma2, t.within_outputs.prob(disp(a.pitch, b.pitch), fa, fb));
                }
            }
        }
        if j == 0 {
            raw += st.iter().map(|&d| t.prior[d as usize - 1].ln()).sum::<f64>();
        } else {
            let (prev, ps) = (&chords[j - 1], &states[j - 1]);
            for (b, &fb) in chord.components.iter().zip(st) {
                if strict && b.sustained {
                    if let Some(k) = prev.components.iter().position(|a| a.note == b.note) {
                        if ps[k] != fb {
                            return f64::NEG_INFINITY;
                        }
                    }
                }
            }
            for (a, &fa) in prev.components.iter().zip(ps) {
                for (b, &fb) in chord.components.iter().zip(st) {
                    raw += w(p.beta1, t.across_fingers[fa as usize - 1][fb as usize - 1]);
                    raw += w(p.gamma1, t.across_outputs.prob(disp(a.pitch, b.pitch), fa, fb));
                }
            }
        }
        total += (chord.size() as f64).powf(-p.zeta) * raw;
    }
    total
}

/// Exhaustive chord decoding: (per-note digits, score, relaxed).
pub fn brute_force_chord_decode(model: &ChordHmmModel, hand: Hand, chords: &[Chord], n_notes: usize) -> (Vec<u8>, f64, bool) {
    let options: Vec<Vec<Vec<u8>>> = chords.iter().map(|c| brute_force_states(c.size(), hand, &[])).collect();
    let search = |strict: bool| -> Option<(Vec<usize>, f64)> {
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut idx = vec![0usize; chords.len()];
        loop {
            let states: Vec<Vec<u8>> = idx.iter().zip(&options).map(|(&i, o)| o[i].clone()).collect();
            let s = oracle_chord_score(model, hand, chords, &states, strict);
            if s > f64::NEG_INFINITY && best.as_ref().is_none_or(|b| s > b.1) {
                best = Some((idx.clone(), s));
            }
            // odometer increment, last chord fastest, so paths come in lexicographic order
            let mut j = chords.len();
            loop {
                if j == 0 {
                    return best;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < options[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    };
    let (path, score, relaxed) = match search(true) {
        Some((p, s)) => (p, s, false),
        None => {
            let (p, s) = search(false).unwrap();
            (p, s, true)
        }
    };
    let mut digits = vec![0u8; n_notes];
    for (j, chord) in chords.iter().enumerate() {
        for (c, &d) in chord.components.iter().zip(&options[j][path[j]]) {
            if !c.sustained {
                digits[c.note] = d;
            }
        }
    }
    (digits, score, relaxed)
}

/// Synthetic annotated two-hand piece: random walk pitches, random fingers,
/// occasional two-note chords.
pub fn random_annotated_piece(rng: &mut impl Rng, id: &str, len: usize, ranges: [(u8, u8); 2]) -> Piece {
    let mut notes = Vec::new();
    for hand in Hand::BOTH {
        let (lo, hi) = ranges[hand.index()];
        let mut pitch = rng.gen_range(lo..=hi);
        let mut t = 0.0;
        let mut chorded = true;
        for _ in 0..len {
            // at most two notes per onset
            chorded = !chorded && rng.gen_bool(0.15);
            t += if chorded { 0.0 } else { 0.25 };
            pitch = (pitch as i32 + rng.gen_range(-5..=5)).clamp(lo as i32, hi as i32) as u8;
            let mut n = note(0, t, t + 0.25, pitch, hand);
            n.finger = FingerLabel::new(hand, rng.gen_range(1..=5));
            notes.push(n);
        }
    }
    notes.sort_by(|a, b| a.onset.total_cmp(&b.onset));
    for (i, n) in notes.iter_mut().enumerate() {
        n.id = i;
    }
    Piece::new(id, notes)
}
