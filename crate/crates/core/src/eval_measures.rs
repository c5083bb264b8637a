//! Match rates of an estimated fingering against several ground truths.
//!
//! * general: mean over ground truths of the per-reference match rate
//! * highest: best per-reference match rate
//! * soft: fraction of notes whose estimate matches at least one reference
//! * recombination: `1 - E/N` where `E` is the least edit cost of stitching
//!   the references into one sequence (switching reference costs `C_rec`
//!   where the two references agree, `C'_rec` elsewhere) and substituting
//!   mismatching fingers (`C_sub` each)

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pig_io::{FingerLabel, GroundTruthSet, Hand};

/// An edit cost that may be infinite, i.e. forbidden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cost {
    Finite(f64),
    Infinite,
}

impl Cost {
    fn value(self) -> f64 {
        match self {
            Cost::Finite(c) => c,
            Cost::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecombinationConfig {
    /// Switching reference where the two references agree.
    pub rec: Cost,
    /// Switching reference where they disagree.
    pub rec_mismatch: Cost,
    pub sub: f64,
}

impl Default for RecombinationConfig {
    fn default() -> Self {
        RecombinationConfig {
            rec: Cost::Finite(1.0),
            rec_mismatch: Cost::Infinite,
            sub: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recombination {
    pub m_rec: f64,
    pub e_rec: f64,
    /// Reference index per note.
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRateReport {
    pub m_gen: f64,
    pub m_high: f64,
    pub m_soft: f64,
    pub m_rec: f64,
    pub e_rec: f64,
    pub path: Vec<usize>,
}

fn check<T, S: AsRef<[T]>>(est: &[T], gts: &[S]) -> Result<()> {
    if gts.is_empty() {
        return Err(Error::InsufficientAnnotators { needed: 1, found: 0 });
    }
    if est.is_empty() {
        return Err(Error::EmptyPiece);
    }
    for (index, gt) in gts.iter().enumerate() {
        if gt.as_ref().len() != est.len() {
            return Err(Error::LengthMismatch {
                index,
                expected: est.len(),
                found: gt.as_ref().len(),
            });
        }
    }
    Ok(())
}

/// Matching positions per reference.
fn hits_per_reference<T: PartialEq, S: AsRef<[T]>>(est: &[T], gts: &[S]) -> Vec<usize> {
    gts.iter()
        .map(|gt| gt.as_ref().iter().zip(est).filter(|(a, b)| a == b).count())
        .collect()
}

// Each rate is a single rounded division of exact integers, which keeps the
// ordering between the measures exact in floating point.
pub fn general_match_rate<T: PartialEq, S: AsRef<[T]>>(est: &[T], gts: &[S]) -> Result<f64> {
    check(est, gts)?;
    let total: usize = hits_per_reference(est, gts).iter().sum();
    Ok(total as f64 / (est.len() * gts.len()) as f64)
}

pub fn highest_match_rate<T: PartialEq, S: AsRef<[T]>>(est: &[T], gts: &[S]) -> Result<f64> {
    check(est, gts)?;
    let best = hits_per_reference(est, gts).into_iter().max().unwrap_or(0);
    Ok(best as f64 / est.len() as f64)
}

pub fn soft_match_rate<T: PartialEq, S: AsRef<[T]>>(est: &[T], gts: &[S]) -> Result<f64> {
    check(est, gts)?;
    let hits = (0..est.len())
        .filter(|&n| gts.iter().any(|gt| gt.as_ref()[n] == est[n]))
        .count();
    Ok(hits as f64 / est.len() as f64)
}

/// Minimum-cost recombination by dynamic programming over the reference
/// index of each note. Among optimal recombinations the lexicographically
/// smallest index sequence is returned.
pub fn recombination_match_rate<T: PartialEq, S: AsRef<[T]>>(
    est: &[T],
    gts: &[S],
    config: &RecombinationConfig,
) -> Result<Recombination> {
    check(est, gts)?;
    let n = est.len();
    let ng = gts.len();
    let refs: Vec<&[T]> = gts.iter().map(|g| g.as_ref()).collect();
    let sub = |pos: usize, g: usize| if refs[g][pos] == est[pos] { 0.0 } else { config.sub };
    let switch = |pos: usize, from: usize, to: usize| -> f64 {
        if from == to {
            0.0
        } else if refs[to][pos] == refs[from][pos] {
            config.rec.value()
        } else {
            config.rec_mismatch.value()
        }
    };

    // togo[pos][g]: least cost of notes pos+1.. given reference g at pos
    let mut togo = vec![vec![0.0f64; ng]; n];
    for pos in (0..n - 1).rev() {
        for g in 0..ng {
            togo[pos][g] = (0..ng)
                .map(|h| switch(pos + 1, g, h) + sub(pos + 1, h) + togo[pos + 1][h])
                .fold(f64::INFINITY, f64::min);
        }
    }
    let mut current = 0;
    let mut total = f64::INFINITY;
    for g in 0..ng {
        let v = sub(0, g) + togo[0][g];
        if v < total {
            total = v;
            current = g;
        }
    }
    let mut path = vec![current];
    for pos in 1..n {
        let mut best = f64::INFINITY;
        let mut choice = 0;
        for h in 0..ng {
            let v = switch(pos, current, h) + sub(pos, h) + togo[pos][h];
            if v < best {
                best = v;
                choice = h;
            }
        }
        path.push(choice);
        current = choice;
    }
    Ok(Recombination {
        m_rec: (n as f64 - total) / n as f64,
        e_rec: total,
        path,
    })
}

pub fn match_rates<T: PartialEq, S: AsRef<[T]>>(
    est: &[T],
    gts: &[S],
    config: &RecombinationConfig,
) -> Result<MatchRateReport> {
    let rec = recombination_match_rate(est, gts, config)?;
    Ok(MatchRateReport {
        m_gen: general_match_rate(est, gts)?,
        m_high: highest_match_rate(est, gts)?,
        m_soft: soft_match_rate(est, gts)?,
        m_rec: rec.m_rec,
        e_rec: rec.e_rec,
        path: rec.path,
    })
}

/// The four rates without the recombination details.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub gen: f64,
    pub high: f64,
    pub soft: f64,
    pub rec: f64,
}

impl Rates {
    pub fn as_array(&self) -> [f64; 4] {
        [self.gen, self.high, self.soft, self.rec]
    }

    fn scaled(self, w: f64) -> Rates {
        Rates {
            gen: self.gen * w,
            high: self.high * w,
            soft: self.soft * w,
            rec: self.rec * w,
        }
    }

    fn plus(self, o: Rates) -> Rates {
        Rates {
            gen: self.gen + o.gen,
            high: self.high + o.high,
            soft: self.soft + o.soft,
            rec: self.rec + o.rec,
        }
    }
}

impl From<&MatchRateReport> for Rates {
    fn from(r: &MatchRateReport) -> Rates {
        Rates {
            gen: r.m_gen,
            high: r.m_high,
            soft: r.m_soft,
            rec: r.m_rec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceEvaluation {
    pub piece_id: String,
    pub notes: usize,
    pub combined: Rates,
    /// `[right, left]`; `None` for a hand without notes.
    pub per_hand: [Option<Rates>; 2],
}

fn select<T: Copy>(seq: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| seq[i]).collect()
}

/// Scores an estimate (in the file order of `gts.notes`) for the whole piece
/// and for each hand part in canonical order.
pub fn evaluate_piece(est: &[FingerLabel], gts: &GroundTruthSet, config: &RecombinationConfig) -> Result<PieceEvaluation> {
    let combined = Rates::from(&match_rates(est, &gts.fingerings, config)?);
    let piece = gts.piece();
    let per_hand = Hand::BOTH.map(|hand| {
        let idx = piece.hand_indices(hand);
        if idx.is_empty() {
            return Ok(None);
        }
        let refs: Vec<Vec<FingerLabel>> = gts.fingerings.iter().map(|g| select(g, &idx)).collect();
        match_rates(&select(est, &idx), &refs, config).map(|r| Some(Rates::from(&r)))
    });
    let [rh, lh] = per_hand;
    Ok(PieceEvaluation {
        piece_id: gts.piece_id.clone(),
        notes: est.len(),
        combined,
        per_hand: [rh?, lh?],
    })
}

/// Leave-one-annotator-out reference: each annotator's fingering scored
/// against all the others, averaged over annotators.
pub fn human_reference(gts: &GroundTruthSet, config: &RecombinationConfig) -> Result<PieceEvaluation> {
    let ng = gts.annotator_count();
    if ng < 2 {
        return Err(Error::InsufficientAnnotators { needed: 2, found: ng });
    }
    let mut evals = Vec::with_capacity(ng);
    for g in 0..ng {
        let others = GroundTruthSet {
            piece_id: gts.piece_id.clone(),
            notes: gts.notes.clone(),
            annotators: (0..ng).filter(|&h| h != g).map(|h| gts.annotators[h].clone()).collect(),
            fingerings: (0..ng).filter(|&h| h != g).map(|h| gts.fingerings[h].clone()).collect(),
        };
        evals.push(evaluate_piece(&gts.fingerings[g], &others, config)?);
    }
    let w = 1.0 / ng as f64;
    let mean = |f: &dyn Fn(&PieceEvaluation) -> Option<Rates>| -> Option<Rates> {
        let mut acc = Rates::default();
        for e in &evals {
            acc = acc.plus(f(e)?.scaled(w));
        }
        Some(acc)
    };
    Ok(PieceEvaluation {
        piece_id: gts.piece_id.clone(),
        notes: gts.len(),
        combined: mean(&|e| Some(e.combined)).expect("combined rates always present"),
        per_hand: [mean(&|e| e.per_hand[0]), mean(&|e| e.per_hand[1])],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub pieces: usize,
    pub notes: usize,
    /// Mean of per-piece rates.
    pub macro_avg: Rates,
    /// Per-piece rates weighted by note count.
    pub micro_avg: Rates,
}

pub fn summarize(evals: &[PieceEvaluation]) -> CorpusSummary {
    let notes: usize = evals.iter().map(|e| e.notes).sum();
    let mut macro_avg = Rates::default();
    let mut micro_avg = Rates::default();
    for e in evals {
        macro_avg = macro_avg.plus(e.combined.scaled(1.0 / evals.len() as f64));
        micro_avg = micro_avg.plus(e.combined.scaled(e.notes as f64 / notes as f64));
    }
    CorpusSummary {
        pieces: evals.len(),
        notes,
        macro_avg,
        micro_avg,
    }
}
