mod args;
mod report;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::Parser;
use fingering::agreement::{self, MultiplicityUnit};
use fingering::corpus::{load_dataset, load_piece, training_pieces, Estimator};
use fingering::eval_measures::{evaluate_piece, human_reference, summarize, PieceEvaluation};
use fingering::experiments::{fit_sqrt, scaling_experiment, tune, TuningSpec};
use fingering::pig_io::{serialize_fingering_file, GroundTruthSet, Hand};
use fingering::{model_file, ModelConfig};

use args::{AnalyzeArgs, Cli, Command, EstimateArgs, EvaluateArgs, ScalingArgs, TrainArgs, TuneArgs};
use report::{full, note, pct, rate_row, rate_table, Table};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Estimate(a) => estimate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Analyze(a) => analyze(a),
        Command::Tune(a) => tune_cmd(a),
        Command::Scaling(a) => scaling(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error chain on one line, skipping causes already spelled out by the
/// message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    let mut last = msg.clone();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !last.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        last = text;
    }
    msg
}

/// Writes through a temporary file in the target directory so a failed run
/// never leaves a truncated file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write to {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn hand_name(hand: Hand) -> &'static str {
    match hand {
        Hand::Right => "right hand",
        Hand::Left => "left hand",
    }
}

fn load_model(path: &Path) -> Result<Estimator> {
    model_file::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn load_sets(dir: &Path) -> Result<Vec<GroundTruthSet>> {
    load_dataset(dir).with_context(|| format!("cannot load pieces from {}", dir.display()))
}

fn config_json(config: &ModelConfig) -> Result<String> {
    Ok(serde_json::to_string(config)?)
}

fn train(args: TrainArgs) -> Result<()> {
    let config = args.model.config()?;
    let sets = load_sets(&args.data)?;
    let pieces = training_pieces(&sets);
    let model = Estimator::train(&pieces, &config)?;
    write_atomic(&args.out, model_file::to_json(&model)?.as_bytes())?;
    let notes: usize = sets.iter().map(|s| s.len()).sum();
    println!("pieces {}  fingerings {}  notes {}", sets.len(), pieces.len(), notes);
    println!("model written to {}", args.out.display());
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let mut model = load_model(&args.model)?;
    if !args.coefficients.is_empty() {
        model = model.reweighted(&args.coefficients.apply(&model.config())?)?;
    }
    let piece = load_piece(&args.piece)?;
    let (annotated, relaxed) = model
        .annotate(&piece)
        .with_context(|| format!("cannot decode {}", args.piece.display()))?;
    for hand in relaxed {
        eprintln!(
            "warning: {}: no fingering of the {} satisfies the model constraints; decoded without them",
            args.piece.display(),
            hand_name(hand)
        );
    }
    emit(args.out.as_deref(), &serialize_fingering_file(&annotated)?)
}

fn summary_rows(table: &mut Table, evals: &[PieceEvaluation]) {
    let s = summarize(evals);
    table.push(rate_row("mean", s.notes, &s.macro_avg));
    table.push(rate_row("note-weighted", s.notes, &s.micro_avg));
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let rec = args.recombination.config();
    let mut out = String::new();
    let (evals, excluded) = if let Some(est_path) = &args.estimate {
        let est = load_piece(est_path)?;
        let gts = args.gt.iter().map(|p| load_piece(p)).collect::<fingering::Result<Vec<_>>>()?;
        let set = GroundTruthSet::from_pieces(est.id.clone(), &gts)?;
        let mut all = vec![est.clone()];
        all.extend(gts);
        GroundTruthSet::from_pieces(est.id.clone(), &all).context("estimate does not match the ground truths")?;
        let fingers = est
            .fingers()
            .with_context(|| format!("{} has notes without fingers", est_path.display()))?;
        (vec![evaluate_piece(&fingers, &set, &rec)?], Vec::new())
    } else if let Some(dir) = &args.data {
        let sets = load_sets(dir)?;
        if args.human {
            note(&mut out, "each annotator scored against the others");
            let mut evals = Vec::new();
            let mut skipped = Vec::new();
            for s in &sets {
                if s.annotator_count() < 2 {
                    skipped.push(s.piece_id.clone());
                } else {
                    evals.push(human_reference(s, &rec)?);
                }
            }
            (evals, skipped)
        } else {
            let Some(model_path) = &args.model else {
                bail!("--data needs --model or --human");
            };
            let model = load_model(model_path)?;
            note(&mut out, format!("model {}", config_json(&model.config())?));
            let result = model.evaluate(&sets, &rec)?;
            (result.pieces, result.excluded)
        }
    } else {
        bail!("give --estimate with --gt, or --data with --model or --human");
    };
    ensure!(!evals.is_empty(), "no piece could be evaluated");
    if !excluded.is_empty() {
        eprintln!("warning: skipped {} piece(s): {}", excluded.len(), excluded.join(", "));
        note(&mut out, format!("skipped {}", excluded.join(" ")));
    }
    let mut table = rate_table(&evals);
    if evals.len() > 1 {
        summary_rows(&mut table, &evals);
    }
    out.push_str(&table.render(args.output.format));
    emit(args.output.out.as_deref(), &out)
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let sets = load_sets(&args.data)?;
    let report = agreement::analyze(&sets)?;
    let format = args.output.format;
    let mut out = String::new();
    let mut points = Table::new(["j", "pieces", "M_j", "M_rand", "m_j", "m_rand"]);
    for p in &report.points {
        points.push(vec![
            p.j.to_string(),
            p.pieces.to_string(),
            pct(p.m_j),
            p.m_rand.map_or("-".into(), pct),
            full(p.m_j),
            p.m_rand.map_or("-".into(), full),
        ]);
    }
    out.push_str(&points.render(format));
    match &report.power {
        Some(f) => note(&mut out, format!("power fit M_j = c j^-gamma: c {} gamma {} residual {}", f.c, f.gamma, f.residual)),
        None => note(&mut out, "power fit needs at least two agreement points"),
    }
    out.push('\n');
    let mut hist = Table::new(["unit", "choices", "count", "share", "fraction"]);
    for (unit, h) in [(MultiplicityUnit::Note, &report.notes), (MultiplicityUnit::NotePair, &report.note_pairs)] {
        let name = match unit {
            MultiplicityUnit::Note => "note",
            MultiplicityUnit::NotePair => "note-pair",
        };
        for (choices, share) in h.proportions() {
            hist.push(vec![
                name.into(),
                choices.to_string(),
                h.counts[&choices].to_string(),
                pct(share),
                full(share),
            ]);
        }
    }
    out.push_str(&hist.render(format));
    emit(args.output.out.as_deref(), &out)
}

fn tune_cmd(args: TuneArgs) -> Result<()> {
    let base = args.model.config()?;
    let train = training_pieces(&load_sets(&args.train)?);
    let valid = load_sets(&args.valid)?;
    let spec = TuningSpec {
        budget: args.budget,
        seed: args.seed,
        objective: args.objective.into(),
        recombination: args.recombination.config(),
        ..TuningSpec::for_config(&base)
    };
    let result = tune(&spec, &base, &train, &valid)?;

    let mut out = String::new();
    note(&mut out, format!("seed {} budget {} objective {:?}", spec.seed, spec.budget, args.objective));
    note(&mut out, format!("base {}", config_json(&base)?));
    let mut header = vec!["trial".to_string(), "score".into(), "value".into()];
    header.extend(spec.bounds.iter().map(|b| b.param.to_string()));
    let mut table = Table::new(header);
    for t in &result.trace {
        let mut row = vec![t.index.to_string(), pct(t.score), full(t.score)];
        row.extend(t.values.iter().map(|&v| full(v)));
        table.push(row);
    }
    out.push_str(&table.render(args.output.format));
    note(&mut out, format!("best trial {} score {}", result.best.index, pct(result.best.score)));
    note(&mut out, format!("best {}", config_json(&result.config)?));

    if let Some(path) = &args.save_model {
        let model = Estimator::train(&train, &result.config)?;
        write_atomic(path, model_file::to_json(&model)?.as_bytes())?;
    }
    emit(args.output.out.as_deref(), &out)
}

fn scaling(args: ScalingArgs) -> Result<()> {
    let config = args.model.config()?;
    let train = training_pieces(&load_sets(&args.train)?);
    let test = load_sets(&args.test)?;
    let points = scaling_experiment(&config, &train, &test, &args.fractions, args.repeats, args.seed)?;

    let mut out = String::new();
    note(&mut out, format!("seed {} repeats {} training fingerings {}", args.seed, args.repeats, train.len()));
    note(&mut out, format!("model {}", config_json(&config)?));
    let mut table = Table::new(["fraction", "runs", "notes", "M_gen", "gen", "gen_std"]);
    for p in &points {
        table.push(vec![
            full(p.fraction),
            p.repeats.to_string(),
            full(p.notes),
            pct(p.m_gen),
            full(p.m_gen),
            full(p.m_gen_std),
        ]);
    }
    out.push_str(&table.render(args.output.format));
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.notes, p.m_gen)).collect();
    match fit_sqrt(&xy) {
        Ok(f) => note(&mut out, format!("fit M_gen = a - b / sqrt(N): a {} b {} residual {}", f.a, f.b, f.residual)),
        Err(e) => note(&mut out, format!("no fit: {e}")),
    }
    emit(args.output.out.as_deref(), &out)
}
