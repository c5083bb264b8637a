//! Coefficient tuning, training-size scaling runs, and the `a - b/sqrt(N)`
//! learning-curve fit.
//!
//! Tuning is a derivative-free box search: a seeded random phase over 70% of
//! the budget, then coordinate-wise refinement with shrinking steps around
//! the best candidate. Only strict improvements replace the incumbent, so
//! ties keep the earliest candidate. The model is trained once; candidates
//! only change the weights, which do not affect the counts.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Estimator, ModelConfig};
use crate::error::{Error, Result};
use crate::eval_measures::{summarize, RecombinationConfig, Rates};
use crate::pig_io::{GroundTruthSet, Piece};
use crate::stats::fit_line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    /// Output weight of lag `l + 1`.
    Alpha(usize),
    /// Interpolation weight of order `l + 1`.
    Lambda(usize),
    Beta1,
    Beta2,
    Gamma1,
    Gamma2,
    Zeta,
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Param::Alpha(l) => write!(f, "alpha{}", l + 1),
            Param::Lambda(l) => write!(f, "lambda{}", l + 1),
            Param::Beta1 => f.write_str("beta1"),
            Param::Beta2 => f.write_str("beta2"),
            Param::Gamma1 => f.write_str("gamma1"),
            Param::Gamma2 => f.write_str("gamma2"),
            Param::Zeta => f.write_str("zeta"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
}

/// Which corpus-level (macro-averaged) rate to maximize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    General,
    Highest,
    Soft,
    Recombination,
}

impl Objective {
    pub fn pick(self, r: &Rates) -> f64 {
        match self {
            Objective::General => r.gen,
            Objective::Highest => r.high,
            Objective::Soft => r.soft,
            Objective::Recombination => r.rec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningSpec {
    pub bounds: Vec<Bound>,
    pub objective: Objective,
    pub budget: usize,
    pub seed: u64,
    /// Evaluated first when present, e.g. the current coefficients.
    pub initial: Option<Vec<f64>>,
    pub recombination: RecombinationConfig,
}

pub const DEFAULT_BUDGET: usize = 200;

impl TuningSpec {
    /// Every weight of `config` with default boxes, starting from its
    /// current values.
    pub fn for_config(config: &ModelConfig) -> TuningSpec {
        let mut bounds = Vec::new();
        match config {
            ModelConfig::NoteHmm(c) => {
                bounds.extend((0..c.order).map(|l| Bound { param: Param::Alpha(l), lo: 0.0, hi: 2.0 }));
                bounds.extend((0..c.order - 1).map(|l| Bound { param: Param::Lambda(l), lo: 0.0, hi: 1.0 }));
            }
            ModelConfig::ChordHmm(_) => {
                for param in [Param::Beta1, Param::Beta2, Param::Gamma1, Param::Gamma2] {
                    bounds.push(Bound { param, lo: 0.0, hi: 10.0 });
                }
                bounds.push(Bound { param: Param::Zeta, lo: 0.0, hi: 1.0 });
            }
        }
        let initial = bounds.iter().map(|b| current_value(config, b.param)).collect::<Option<Vec<_>>>();
        TuningSpec {
            bounds,
            objective: Objective::General,
            budget: DEFAULT_BUDGET,
            seed: 0,
            initial,
            recombination: RecombinationConfig::default(),
        }
    }

    fn validate(&self, config: &ModelConfig) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidConfig("tuning budget must be at least 1".into()));
        }
        for b in &self.bounds {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo <= b.hi && b.lo >= 0.0) {
                return Err(Error::InvalidConfig(format!("bad bounds for {}", b.param)));
            }
            if current_value(config, b.param).is_none() {
                return Err(Error::InvalidConfig(format!("{} does not apply to this model", b.param)));
            }
        }
        let lambda_floor: f64 = self
            .bounds
            .iter()
            .filter(|b| matches!(b.param, Param::Lambda(_)))
            .map(|b| b.lo)
            .sum();
        if lambda_floor > 1.0 {
            return Err(Error::InvalidConfig("lambda lower bounds sum above 1".into()));
        }
        if let Some(init) = &self.initial {
            if init.len() != self.bounds.len() {
                return Err(Error::InvalidConfig("initial candidate has the wrong length".into()));
            }
        }
        Ok(())
    }

    /// Clamps into the box, then pulls the lambda weights toward their lower
    /// bounds until they sum to at most 1.
    pub fn project(&self, x: &mut [f64]) {
        for (v, b) in x.iter_mut().zip(&self.bounds) {
            *v = if v.is_nan() { b.lo } else { v.clamp(b.lo, b.hi) };
        }
        let lambdas: Vec<usize> = (0..x.len())
            .filter(|&i| matches!(self.bounds[i].param, Param::Lambda(_)))
            .collect();
        let sum: f64 = lambdas.iter().map(|&i| x[i]).sum();
        if sum > 1.0 {
            let floor: f64 = lambdas.iter().map(|&i| self.bounds[i].lo).sum();
            let t = (1.0 - floor) / (sum - floor);
            for &i in &lambdas {
                let lo = self.bounds[i].lo;
                x[i] = lo + t * (x[i] - lo);
            }
            // guard against the scaled sum landing an ulp above 1
            let again: f64 = lambdas.iter().map(|&i| x[i]).sum();
            if again > 1.0 {
                if let Some(&i) = lambdas.iter().max_by(|&&a, &&b| x[a].total_cmp(&x[b])) {
                    x[i] = (x[i] - (again - 1.0)).max(self.bounds[i].lo);
                }
            }
        }
    }
}

fn current_value(config: &ModelConfig, param: Param) -> Option<f64> {
    match (config, param) {
        (ModelConfig::NoteHmm(c), Param::Alpha(l)) => c.alpha.get(l).copied(),
        (ModelConfig::NoteHmm(c), Param::Lambda(l)) => c.lambda.get(l).copied(),
        (ModelConfig::ChordHmm(p), Param::Beta1) => Some(p.beta1),
        (ModelConfig::ChordHmm(p), Param::Beta2) => Some(p.beta2),
        (ModelConfig::ChordHmm(p), Param::Gamma1) => Some(p.gamma1),
        (ModelConfig::ChordHmm(p), Param::Gamma2) => Some(p.gamma2),
        (ModelConfig::ChordHmm(p), Param::Zeta) => Some(p.zeta),
        _ => None,
    }
}

/// Writes candidate values into a copy of `config`.
pub fn apply(config: &ModelConfig, bounds: &[Bound], x: &[f64]) -> ModelConfig {
    let mut out = config.clone();
    for (b, &v) in bounds.iter().zip(x) {
        match (&mut out, b.param) {
            (ModelConfig::NoteHmm(c), Param::Alpha(l)) => c.alpha[l] = v,
            (ModelConfig::NoteHmm(c), Param::Lambda(l)) => c.lambda[l] = v,
            (ModelConfig::ChordHmm(p), Param::Beta1) => p.beta1 = v,
            (ModelConfig::ChordHmm(p), Param::Beta2) => p.beta2 = v,
            (ModelConfig::ChordHmm(p), Param::Gamma1) => p.gamma1 = v,
            (ModelConfig::ChordHmm(p), Param::Gamma2) => p.gamma2 = v,
            (ModelConfig::ChordHmm(p), Param::Zeta) => p.zeta = v,
            _ => {}
        }
    }
    out
}

/// `trained` with the weights of `config`, without retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub values: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub best: Trial,
    pub config: ModelConfig,
    pub trace: Vec<Trial>,
}

struct Evaluator<'a> {
    spec: &'a TuningSpec,
    base: &'a ModelConfig,
    trained: &'a Estimator,
    valid: &'a [GroundTruthSet],
}

impl Evaluator<'_> {
    fn score(&self, x: &[f64]) -> Result<f64> {
        let model = self.trained.reweighted(&apply(self.base, &self.spec.bounds, x))?;
        let evals = model.evaluate(self.valid, &self.spec.recombination)?;
        Ok(self.spec.objective.pick(&summarize(&evals.pieces).macro_avg))
    }
}

/// Searches the weights of `base` that maximize the objective on `valid`
/// for a model trained on `train`.
pub fn tune(spec: &TuningSpec, base: &ModelConfig, train: &[Piece], valid: &[GroundTruthSet]) -> Result<TuningResult> {
    if train.is_empty() || valid.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    spec.validate(base)?;
    let trained = Estimator::train(train, base)?;
    let eval = Evaluator {
        spec,
        base,
        trained: &trained,
        valid,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let random_budget = ((spec.budget as f64 * 0.7).ceil() as usize).clamp(1, spec.budget);

    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(random_budget);
    if let Some(init) = &spec.initial {
        let mut x = init.clone();
        spec.project(&mut x);
        candidates.push(x);
    }
    while candidates.len() < random_budget {
        let mut x: Vec<f64> = spec.bounds.iter().map(|b| rng.gen_range(b.lo..=b.hi)).collect();
        spec.project(&mut x);
        candidates.push(x);
    }
    let scores: Vec<f64> = candidates.par_iter().map(|x| eval.score(x)).collect::<Result<_>>()?;
    let mut trace: Vec<Trial> = candidates
        .into_iter()
        .zip(scores)
        .enumerate()
        .map(|(index, (values, score))| Trial { index, values, score })
        .collect();
    let mut best = trace[0].clone();
    for t in &trace[1..] {
        if t.score > best.score {
            best = t.clone();
        }
    }

    let mut steps: Vec<f64> = spec.bounds.iter().map(|b| (b.hi - b.lo) / 4.0).collect();
    'refine: while trace.len() < spec.budget && !spec.bounds.is_empty() {
        let mut improved = false;
        for k in 0..spec.bounds.len() {
            for sign in [1.0, -1.0] {
                if trace.len() >= spec.budget {
                    break 'refine;
                }
                let mut x = best.values.clone();
                x[k] += sign * steps[k];
                spec.project(&mut x);
                if x == best.values {
                    continue;
                }
                let score = eval.score(&x)?;
                let trial = Trial {
                    index: trace.len(),
                    values: x,
                    score,
                };
                trace.push(trial.clone());
                if score > best.score {
                    best = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s /= 2.0);
            if steps.iter().zip(&spec.bounds).all(|(s, b)| *s <= (b.hi - b.lo) * 1e-9) {
                break;
            }
        }
    }
    Ok(TuningResult {
        config: apply(base, &spec.bounds, &best.values),
        best,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub fraction: f64,
    pub repeats: usize,
    /// Mean number of training notes.
    pub notes: f64,
    pub m_gen: f64,
    pub m_gen_std: f64,
}

/// For each fraction, trains on `repeats` random piece subsets of that size
/// and records the mean macro-averaged general match rate on `test`. A
/// fraction of 1 uses the full set once.
pub fn scaling_experiment(
    config: &ModelConfig,
    train: &[Piece],
    test: &[GroundTruthSet],
    fractions: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<ScalingPoint>> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidConfig(format!("fraction {f} not in (0, 1]")));
    }
    let rec = RecombinationConfig::default();
    let mut points = Vec::with_capacity(fractions.len());
    for (fi, &fraction) in fractions.iter().enumerate() {
        let size = ((fraction * train.len() as f64).round() as usize).clamp(1, train.len());
        let runs = if size == train.len() { 1 } else { repeats };
        let results: Vec<(f64, f64)> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((fi as u64) << 32) | r as u64);
                let mut idx = sample(&mut rng, train.len(), size).into_vec();
                idx.sort_unstable();
                let subset: Vec<Piece> = idx.iter().map(|&i| train[i].clone()).collect();
                let notes = subset.iter().map(|p| p.len()).sum::<usize>() as f64;
                let model = Estimator::train(&subset, config)?;
                let evals = model.evaluate(test, &rec)?;
                Ok((notes, summarize(&evals.pieces).macro_avg.gen))
            })
            .collect::<Result<_>>()?;
        let k = results.len() as f64;
        let mean = results.iter().map(|r| r.1).sum::<f64>() / k;
        let var = results.iter().map(|r| (r.1 - mean).powi(2)).sum::<f64>() / k;
        points.push(ScalingPoint {
            fraction,
            repeats: results.len(),
            notes: results.iter().map(|r| r.0).sum::<f64>() / k,
            m_gen: mean,
            m_gen_std: var.sqrt(),
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Limit for unbounded training data.
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

/// Least-squares fit of `A(N) = a - b / sqrt(N)` to `(N, A)` points.
pub fn fit_sqrt(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.iter().any(|p| p.0.is_nan() || p.0 <= 0.0) {
        return Err(Error::DegenerateFit("sample sizes must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.0.sqrt()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let line = fit_line(&xs, &ys)?;
    Ok(ScalingFit {
        a: line.intercept,
        b: -line.slope,
        residual: line.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chord_hmm::ChordHmmParams;
    use crate::note_hmm::NoteHmmConfig;

    #[test]
    fn sqrt_fit_examples() {
        let pts: Vec<(f64, f64)> = [100.0, 400.0, 2500.0].iter().map(|&n: &f64| (n, 0.64 - 0.5 / n.sqrt())).collect();
        assert!((pts[0].1 - 0.59).abs() < 1e-15 && (pts[1].1 - 0.615).abs() < 1e-15 && (pts[2].1 - 0.63).abs() < 1e-15);
        let f = fit_sqrt(&pts).unwrap();
        assert!((f.a - 0.64).abs() < 1e-9 && (f.b - 0.5).abs() < 1e-9);
        let flat = fit_sqrt(&[(10.0, 0.6), (90.0, 0.6)]).unwrap();
        assert!(flat.b.abs() < 1e-12 && (flat.a - 0.6).abs() < 1e-12);
        assert!(fit_sqrt(&[(10.0, 0.6), (10.0, 0.7)]).is_err());
        assert!(fit_sqrt(&[(10.0, 0.6)]).is_err());
    }

    #[test]
    fn projection_respects_box_and_simplex() {
        let spec = TuningSpec::for_config(&ModelConfig::NoteHmm(NoteHmmConfig::tuned(3)));
        let mut x = vec![3.0, -1.0, 0.5, 0.9, 0.8];
        spec.project(&mut x);
        assert_eq!(&x[..3], &[2.0, 0.0, 0.5]);
        assert!(x[3] + x[4] <= 1.0);
        assert!((x[3] / x[4] - 0.9 / 0.8).abs() < 1e-12);
    }

    #[test]
    fn defaults_start_from_published_weights() {
        let spec = TuningSpec::for_config(&ModelConfig::NoteHmm(NoteHmmConfig::tuned(2)));
        assert_eq!(spec.initial, Some(vec![0.556, 0.407, 0.474]));
        let chord = TuningSpec::for_config(&ModelConfig::ChordHmm(ChordHmmParams::default()));
        assert_eq!(chord.initial, Some(vec![0.94, 4.70, 7.53, 5.29, 0.10]));
        assert_eq!(spec.budget, 200);
    }
}
