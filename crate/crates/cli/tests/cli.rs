use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fingering"))
        .args(args)
        .current_dir(fixtures())
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = run(args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn trained(dir: &Path, extra: &[&str]) -> String {
    let model = dir.join("model.json").to_str().unwrap().to_string();
    let mut args = vec!["train", "train", "--out", &model];
    args.extend(extra);
    ok(&args);
    model
}

#[test]
fn train_reports_corpus_size() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let out = ok(&["train", "train", "--out", model.to_str().unwrap()]);
    assert!(out.contains("pieces 6  fingerings 13  notes 480"), "{out}");
    assert!(model.exists());
}

#[test]
fn estimate_matches_the_frozen_output() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained(dir.path(), &[]);
    let out = ok(&["estimate", "piece.txt", "--model", &model]);
    assert_eq!(out, fs::read_to_string(fixtures().join("golden_estimate.txt")).unwrap());
}

#[test]
fn re_estimating_an_estimate_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained(dir.path(), &["--order", "3"]);
    let first = dir.path().join("first.txt");
    ok(&["estimate", "piece.txt", "--model", &model, "--out", first.to_str().unwrap()]);
    let second = ok(&["estimate", first.to_str().unwrap(), "--model", &model]);
    assert_eq!(second, fs::read_to_string(&first).unwrap());
}

#[test]
fn chord_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained(dir.path(), &["--model-kind", "chord-hmm", "--beta", "1,4", "--zeta", "0.2"]);
    let out = ok(&["estimate", "piece.txt", "--model", &model]);
    assert_eq!(out.lines().count(), 50);
    let report = ok(&["evaluate", "--data", "test", "--model", &model, "--format", "table"]);
    assert!(report.contains("\"kind\":\"chord-hmm\""), "{report}");
    assert!(report.contains("\"beta1\":1.0"), "{report}");
}

#[test]
fn evaluate_identical_estimate_scores_full_marks() {
    let out = ok(&["evaluate", "--estimate", "test/007/1.txt", "--gt", "test/007/1.txt", "--format", "table"]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(&row[2..6], ["100.0"; 4]);
    assert_eq!(&row[6..], ["1"; 4]);
}

#[test]
fn evaluate_rows_respect_the_measure_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained(dir.path(), &["--order", "1"]);
    for args in [
        vec!["evaluate", "--data", "test", "--model", model.as_str(), "--format", "table"],
        vec!["evaluate", "--data", "test", "--human", "--format", "table"],
    ] {
        let out = ok(&args);
        let rows = out.lines().filter(|l| !l.starts_with('#')).skip(1);
        let mut n = 0;
        for row in rows {
            let v: Vec<f64> = row.split('\t').skip(6).map(|x| x.parse().unwrap()).collect();
            let (gen, high, soft, rec) = (v[0], v[1], v[2], v[3]);
            assert!(gen <= high && high <= rec && rec <= soft, "{row}");
            n += 1;
        }
        assert_eq!(n, 5);
    }
}

#[test]
fn human_mode_matches_known_values() {
    let out = ok(&["evaluate", "--data", "test", "--human", "--format", "table"]);
    let mean = out.lines().find(|l| l.starts_with("mean\t")).unwrap();
    assert!(mean.starts_with("mean\t180\t78.7\t80.9\t83.5\t80.9\t"), "{mean}");
}

#[test]
fn analyze_reports_agreement_and_multiplicities() {
    let out = ok(&["analyze", "test", "--format", "table"]);
    assert!(out.starts_with("j\tpieces\tM_j\tM_rand\tm_j\tm_rand\n2\t3\t78.7\t78.7\t"), "{out}");
    assert!(out.contains("\nnote\t1\t133\t73.9\t"));
    assert!(out.contains("# power fit"));
}

#[test]
fn tune_is_reproducible_and_saves_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("best.json");
    let args = [
        "tune", "--train", "train", "--valid", "test", "--order", "1", "--budget", "6", "--seed", "3", "--format", "table",
    ];
    let a = ok(&args);
    let mut with_save = args.to_vec();
    with_save.extend(["--save-model", saved.to_str().unwrap()]);
    let b = ok(&with_save);
    assert_eq!(a, b);
    assert!(saved.exists());
    let trials = a.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(trials, 6);
    assert!(a.lines().nth(2).unwrap().starts_with("trial\tscore\tvalue\talpha1"));
    ok(&["estimate", "piece.txt", "--model", saved.to_str().unwrap()]);
}

#[test]
fn scaling_is_reproducible() {
    let args = ["scaling", "--train", "train", "--test", "test", "--fractions", "0.3,0.6,1", "--repeats", "2", "--seed", "5", "--order", "1"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(a.contains("# fit M_gen = a - b / sqrt(N)"));
}

#[test]
fn bad_inputs_fail_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let err = fails(&["train", empty.to_str().unwrap(), "--out", model.to_str().unwrap()]);
    assert!(err.contains("empty"), "{err}");
    assert!(!model.exists());

    let err = fails(&["train", "train", "--model-kind", "chord-hmm", "--order", "2", "--out", model.to_str().unwrap()]);
    assert!(err.contains("--order"), "{err}");
    let err = fails(&["train", "train", "--alpha", "1", "--out", model.to_str().unwrap()]);
    assert!(err.contains("--alpha needs 2 values"), "{err}");
    assert!(!model.exists());

    let broken = dir.path().join("broken.txt");
    fs::write(&broken, "0\t0.0\t0.5\tC4\t64\t64\t0\t1\n1\t0.5\t1.0\tH9\t64\t64\t0\t2\n").unwrap();
    let real = trained(dir.path(), &[]);
    let out = dir.path().join("out.txt");
    let err = fails(&["estimate", broken.to_str().unwrap(), "--model", &real, "--out", out.to_str().unwrap()]);
    assert!(err.contains("broken.txt") && err.contains("line 2"), "{err}");
    assert!(!out.exists());

    let err = fails(&["evaluate", "--estimate", "test/007/1.txt", "--gt", "test/008/1.txt"]);
    assert!(err.contains("error:"), "{err}");
}

#[test]
fn pitch_and_symmetry_flags_reach_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = trained(dir.path(), &["--pitch", "integral", "--symmetry", "time+reflect", "--delta-ms", "50", "--no-chord-constraint"]);
    let file: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let config = &file["config"];
    assert_eq!(config["pitch_repr"], "integral");
    assert_eq!(config["symmetries"]["time_inversion"], true);
    assert_eq!(config["symmetries"]["reflection"], true);
    assert_eq!(config["chord_constraint"], false);
    assert_eq!(config["chord_threshold"], 0.05);
}
