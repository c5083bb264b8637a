//! Agreement between annotators: multi-player match rates, the two-choice
//! random reference, finger-choice multiplicities and power-law fits.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pig_io::{FingerLabel, GroundTruthSet, Hand};
use crate::stats::fit_line;

fn check_aligned<T, S: AsRef<[T]>>(gts: &[S]) -> Result<usize> {
    let n = gts.first().map_or(0, |g| g.as_ref().len());
    for (index, g) in gts.iter().enumerate() {
        if g.as_ref().len() != n {
            return Err(Error::LengthMismatch {
                index,
                expected: n,
                found: g.as_ref().len(),
            });
        }
    }
    Ok(n)
}

/// Fraction of positions on which all `j` fingerings of a subset agree,
/// averaged over every `j`-subset of `gts`.
pub fn multi_match_rate<T: PartialEq, S: AsRef<[T]>>(gts: &[S], j: usize) -> Result<f64> {
    if j < 2 || j > gts.len() {
        return Err(Error::InsufficientAnnotators {
            needed: j.max(2),
            found: gts.len(),
        });
    }
    let n = check_aligned(gts)?;
    if n == 0 {
        return Err(Error::EmptyPiece);
    }
    let mut sum = 0.0;
    let mut subsets = 0usize;
    for subset in (0..gts.len()).combinations(j) {
        let first = gts[subset[0]].as_ref();
        let agree = (0..n)
            .filter(|&pos| subset[1..].iter().all(|&g| gts[g].as_ref()[pos] == first[pos]))
            .count();
        sum += agree as f64 / n as f64;
        subsets += 1;
    }
    Ok(sum / subsets as f64)
}

/// Expected `j`-player match rate when each note independently takes one of
/// two fingers with probabilities `ω` and `1-ω`, with `ω` fixed by `M2`.
pub fn random_model_match(m2: f64, j: u32) -> Result<f64> {
    if !(0.5..=1.0).contains(&m2) {
        return Err(Error::OutOfDomain(m2));
    }
    let s = (2.0 * m2 - 1.0).sqrt();
    let omega = (1.0 + s) / 2.0;
    Ok(omega.powi(j as i32) + (1.0 - omega).powi(j as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultiplicityUnit {
    Note,
    /// Consecutive notes of one hand part.
    NotePair,
}

/// Number of distinct choices across annotators at each unit.
pub fn multiplicity_counts<T: PartialEq, S: AsRef<[T]>>(gts: &[S], unit: MultiplicityUnit) -> Result<Vec<usize>> {
    if gts.len() < 2 {
        return Err(Error::InsufficientAnnotators {
            needed: 2,
            found: gts.len(),
        });
    }
    let n = check_aligned(gts)?;
    let distinct = |key: &dyn Fn(&[T]) -> (&T, Option<&T>)| -> usize {
        let mut seen: Vec<(&T, Option<&T>)> = Vec::new();
        for g in gts {
            let k = key(g.as_ref());
            if !seen.contains(&k) {
                seen.push(k);
            }
        }
        seen.len()
    };
    Ok(match unit {
        MultiplicityUnit::Note => (0..n).map(|pos| distinct(&|g| (&g[pos], None))).collect(),
        MultiplicityUnit::NotePair => (1..n)
            .map(|pos| distinct(&|g| (&g[pos - 1], Some(&g[pos]))))
            .collect(),
    })
}

/// Proportion of units per number of distinct choices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub total: usize,
    pub counts: BTreeMap<usize, usize>,
}

impl Histogram {
    pub fn from_counts(counts: impl IntoIterator<Item = usize>) -> Histogram {
        let mut h = Histogram::default();
        h.extend(counts);
        h
    }

    pub fn extend(&mut self, counts: impl IntoIterator<Item = usize>) {
        for c in counts {
            *self.counts.entry(c).or_default() += 1;
            self.total += 1;
        }
    }

    pub fn proportions(&self) -> Vec<(usize, f64)> {
        self.counts
            .iter()
            .map(|(&k, &c)| (k, c as f64 / self.total as f64))
            .collect()
    }
}

/// Multiplicity histogram of generic aligned sequences, treated as one part.
pub fn multiplicity_distribution<T: PartialEq, S: AsRef<[T]>>(gts: &[S], unit: MultiplicityUnit) -> Result<Histogram> {
    Ok(Histogram::from_counts(multiplicity_counts(gts, unit)?))
}

/// Per-unit multiplicities of a piece, each hand part taken separately in
/// canonical order.
pub fn piece_multiplicities(gts: &GroundTruthSet, unit: MultiplicityUnit) -> Result<Vec<usize>> {
    let piece = gts.piece();
    let mut out = Vec::new();
    for hand in Hand::BOTH {
        let idx = piece.hand_indices(hand);
        if idx.is_empty() {
            continue;
        }
        let parts: Vec<Vec<FingerLabel>> = gts
            .fingerings
            .iter()
            .map(|g| idx.iter().map(|&i| g[i]).collect())
            .collect();
        out.extend(multiplicity_counts(&parts, unit)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub c: f64,
    pub gamma: f64,
    pub residual: f64,
}

/// Fits `M = c * j^-gamma` by least squares on `ln M = ln c - gamma ln j`.
pub fn fit_power(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.iter().any(|&(j, m)| !(j > 0.0 && m > 0.0)) {
        return Err(Error::DegenerateFit("power fit needs positive coordinates".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let line = fit_line(&xs, &ys)?;
    Ok(PowerFit {
        c: line.intercept.exp(),
        gamma: -line.slope,
        residual: line.residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementPoint {
    pub j: usize,
    /// Mean over pieces with at least `j` annotators.
    pub m_j: f64,
    pub pieces: usize,
    /// Two-choice random reference derived from `M_2`; `None` if `M_2 < 0.5`.
    pub m_rand: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub points: Vec<AgreementPoint>,
    pub power: Option<PowerFit>,
    pub notes: Histogram,
    pub note_pairs: Histogram,
}

/// Agreement statistics over the multi-annotator pieces of `sets`; pieces
/// with a single annotator are ignored.
pub fn analyze(sets: &[GroundTruthSet]) -> Result<AgreementReport> {
    let multi: Vec<&GroundTruthSet> = sets.iter().filter(|s| s.annotator_count() >= 2).collect();
    let max_j = multi.iter().map(|s| s.annotator_count()).max().ok_or(Error::InsufficientAnnotators {
        needed: 2,
        found: sets.iter().map(|s| s.annotator_count()).max().unwrap_or(0),
    })?;
    let mut raw = Vec::new();
    for j in 2..=max_j {
        let mut sum = 0.0;
        let mut pieces = 0;
        for s in multi.iter().filter(|s| s.annotator_count() >= j) {
            sum += multi_match_rate(&s.fingerings, j)?;
            pieces += 1;
        }
        raw.push((j, sum / pieces as f64, pieces));
    }
    let m2 = raw[0].1;
    let points: Vec<AgreementPoint> = raw
        .into_iter()
        .map(|(j, m_j, pieces)| AgreementPoint {
            j,
            m_j,
            pieces,
            m_rand: random_model_match(m2, j as u32).ok(),
        })
        .collect();
    let fit_points: Vec<(f64, f64)> = points.iter().map(|p| (p.j as f64, p.m_j)).collect();
    let power = if fit_points.len() >= 2 { fit_power(&fit_points).ok() } else { None };
    let mut notes = Histogram::default();
    let mut note_pairs = Histogram::default();
    for s in &multi {
        notes.extend(piece_multiplicities(s, MultiplicityUnit::Note)?);
        note_pairs.extend(piece_multiplicities(s, MultiplicityUnit::NotePair)?);
    }
    Ok(AgreementReport {
        points,
        power,
        notes,
        note_pairs,
    })
}
