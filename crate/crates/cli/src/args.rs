use std::path::PathBuf;

use anyhow::{bail, ensure, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fingering::eval_measures::Cost;
use fingering::experiments::{Objective, DEFAULT_BUDGET};
use fingering::{ChordHmmParams, ModelConfig, NoteHmmConfig, PitchRepr, RecombinationConfig, Symmetries};

#[derive(Debug, Parser)]
#[command(name = "fingering", version, about = "Train, decode and evaluate piano fingering models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a directory of annotated pieces.
    Train(TrainArgs),
    /// Decode the fingering of one piece.
    Estimate(EstimateArgs),
    /// Score estimates against ground-truth fingerings.
    Evaluate(EvaluateArgs),
    /// Inter-annotator agreement of a multi-annotator corpus.
    Analyze(AnalyzeArgs),
    /// Search model weights that maximize a match rate on validation data.
    Tune(TuneArgs),
    /// Accuracy against training-set size.
    Scaling(ScalingArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    NoteHmm,
    ChordHmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pitch {
    Lattice,
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Symmetry {
    None,
    Time,
    Reflect,
    #[value(name = "time+reflect")]
    TimeReflect,
}

impl Symmetry {
    fn flags(self) -> Symmetries {
        Symmetries {
            time_inversion: matches!(self, Symmetry::Time | Symmetry::TimeReflect),
            reflection: matches!(self, Symmetry::Reflect | Symmetry::TimeReflect),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned columns for reading.
    Text,
    /// Tab-separated columns for other programs.
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Gen,
    High,
    Soft,
    Rec,
}

impl From<Target> for Objective {
    fn from(t: Target) -> Objective {
        match t {
            Target::Gen => Objective::General,
            Target::High => Objective::Highest,
            Target::Soft => Objective::Soft,
            Target::Rec => Objective::Recombination,
        }
    }
}

/// Weight overrides; which ones apply depends on the model kind.
#[derive(Debug, Clone, Default, Args)]
pub struct Coefficients {
    /// Output weights, one per order of the note HMM.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub alpha: Option<Vec<f64>>,
    /// Interpolation weights of the lower orders of the note HMM.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub lambda: Option<Vec<f64>>,
    /// Chord HMM finger weights: across,within.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub beta: Option<Vec<f64>>,
    /// Chord HMM output weights: across,within.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub gamma: Option<Vec<f64>>,
    /// Chord-size normalization exponent of the chord HMM.
    #[arg(long)]
    pub zeta: Option<f64>,
}

impl Coefficients {
    /// `config` with the given overrides.
    pub fn apply(&self, config: &ModelConfig) -> Result<ModelConfig> {
        Ok(match config {
            ModelConfig::NoteHmm(c) => {
                ensure!(
                    self.beta.is_none() && self.gamma.is_none() && self.zeta.is_none(),
                    "--beta, --gamma and --zeta apply to the chord HMM only"
                );
                let mut c = c.clone();
                if let Some(alpha) = &self.alpha {
                    ensure!(alpha.len() == c.order, "--alpha needs {} values for order {}", c.order, c.order);
                    c.alpha = alpha.clone();
                }
                if let Some(lambda) = &self.lambda {
                    ensure!(lambda.len() + 1 == c.order, "--lambda needs {} values for order {}", c.order - 1, c.order);
                    c.lambda = lambda.clone();
                }
                c.validate()?;
                ModelConfig::NoteHmm(c)
            }
            ModelConfig::ChordHmm(p) => {
                ensure!(
                    self.alpha.is_none() && self.lambda.is_none(),
                    "--alpha and --lambda apply to the note HMM only"
                );
                let mut p = p.clone();
                if let Some(b) = &self.beta {
                    ensure!(b.len() == 2, "--beta needs two values: across,within");
                    (p.beta1, p.beta2) = (b[0], b[1]);
                }
                if let Some(g) = &self.gamma {
                    ensure!(g.len() == 2, "--gamma needs two values: across,within");
                    (p.gamma1, p.gamma2) = (g[0], g[1]);
                }
                if let Some(z) = self.zeta {
                    p.zeta = z;
                }
                p.validate()?;
                ModelConfig::ChordHmm(p)
            }
        })
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_none() && self.lambda.is_none() && self.beta.is_none() && self.gamma.is_none() && self.zeta.is_none()
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "note-hmm")]
    pub model_kind: ModelKind,
    /// Markov order of the note HMM (1 to 3) [default: 2].
    #[arg(long)]
    pub order: Option<usize>,
    /// Pitch representation of the note HMM [default: lattice].
    #[arg(long, value_enum)]
    pub pitch: Option<Pitch>,
    /// Output-table symmetries imposed besides transposition.
    #[arg(long, value_enum, default_value = "none")]
    pub symmetry: Symmetry,
    /// Drop the note HMM's non-crossing rule inside chords.
    #[arg(long)]
    pub no_chord_constraint: bool,
    /// Onset distance below which notes form a chord, in milliseconds.
    #[arg(long, default_value_t = 30.0)]
    pub delta_ms: f64,
    /// Largest pitch displacement kept distinct before clamping.
    #[arg(long, default_value_t = 15)]
    pub delta_p_max: i32,
    #[command(flatten)]
    pub coefficients: Coefficients,
}

impl ModelArgs {
    pub fn config(&self) -> Result<ModelConfig> {
        ensure!(self.delta_ms.is_finite() && self.delta_ms >= 0.0, "--delta-ms must be non-negative");
        let base = match self.model_kind {
            ModelKind::NoteHmm => {
                let order = self.order.unwrap_or(2);
                ensure!((1..=3).contains(&order), "--order must be 1, 2 or 3");
                ModelConfig::NoteHmm(NoteHmmConfig {
                    pitch_repr: match self.pitch.unwrap_or(Pitch::Lattice) {
                        Pitch::Lattice => PitchRepr::Lattice,
                        Pitch::Integral => PitchRepr::Integral,
                    },
                    symmetries: self.symmetry.flags(),
                    delta_p_max: self.delta_p_max,
                    chord_threshold: self.delta_ms / 1000.0,
                    chord_constraint: !self.no_chord_constraint,
                    ..NoteHmmConfig::tuned(order)
                })
            }
            ModelKind::ChordHmm => {
                if self.order.is_some() {
                    bail!("--order applies to the note HMM only");
                }
                if self.pitch == Some(Pitch::Integral) {
                    bail!("the chord HMM uses the lattice representation only");
                }
                if self.no_chord_constraint {
                    bail!("--no-chord-constraint applies to the note HMM only");
                }
                ModelConfig::ChordHmm(ChordHmmParams {
                    symmetries: self.symmetry.flags(),
                    delta_p_max: self.delta_p_max,
                    chord_threshold: self.delta_ms / 1000.0,
                    ..ChordHmmParams::default()
                })
            }
        };
        self.coefficients.apply(&base)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

fn parse_cost(s: &str) -> Result<Cost, String> {
    match s {
        "inf" | "infinity" => Ok(Cost::Infinite),
        _ => match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(Cost::Finite(v)),
            _ => Err(format!("`{s}` is neither a non-negative number nor `inf`")),
        },
    }
}

#[derive(Debug, Clone, Args)]
pub struct RecombinationArgs {
    /// Cost of switching reference where both references agree.
    #[arg(long, default_value = "1", value_parser = parse_cost)]
    pub rec_cost: Cost,
    /// Cost of switching reference where they disagree.
    #[arg(long, default_value = "inf", value_parser = parse_cost)]
    pub rec_mismatch_cost: Cost,
}

impl RecombinationArgs {
    pub fn config(&self) -> RecombinationConfig {
        RecombinationConfig {
            rec: self.rec_cost,
            rec_mismatch: self.rec_mismatch_cost,
            ..RecombinationConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of annotated pieces.
    pub data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Fingering file to decode; existing fingers are ignored.
    pub piece: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub coefficients: Coefficients,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated fingering file, scored against the `--gt` files.
    #[arg(long, requires = "gt", conflicts_with_all = ["data", "model", "human"])]
    pub estimate: Option<PathBuf>,
    /// Ground-truth fingering files of the same piece.
    #[arg(long, num_args = 1..)]
    pub gt: Vec<PathBuf>,
    /// Directory of multi-annotator pieces, decoded with `--model`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model file used to decode every piece of `--data`.
    #[arg(long, requires = "data", conflicts_with = "human")]
    pub model: Option<PathBuf>,
    /// Score each annotator of `--data` against the others.
    #[arg(long, requires = "data")]
    pub human: bool,
    #[command(flatten)]
    pub recombination: RecombinationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory of multi-annotator pieces.
    pub data: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Training pieces.
    #[arg(long)]
    pub train: PathBuf,
    /// Validation pieces.
    #[arg(long)]
    pub valid: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Rate to maximize.
    #[arg(long, value_enum, default_value = "gen")]
    pub objective: Target,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also train the best configuration and write it as a model file.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub recombination: RecombinationArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// Training pieces, subsampled.
    #[arg(long)]
    pub train: PathBuf,
    /// Test pieces.
    #[arg(long)]
    pub test: PathBuf,
    /// Training-set fractions in (0, 1].
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.1,0.2,0.4,0.7,1")]
    pub fractions: Vec<f64>,
    /// Random subsets per fraction.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}
