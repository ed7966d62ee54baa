//! Smoke tests over the binary: the full command chain on a synthetic
//! recording, plus exit codes on bad input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sollu(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sollu"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = sollu(args, cwd);
    assert!(
        out.status.success(),
        "sollu {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn full_command_chain_on_synthetic_audio() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let out_dir = "out";

    // Render a ground-truth recording.
    let stdout = ok(
        &[
            "--out-dir", out_dir, "synth", "--pattern", "Natta", "--tempo", "1.25",
            "--bars", "2", "--seed", "3",
        ],
        root,
    );
    assert!(stdout.contains("28 events"));
    let art = |suffix: &str| root.join(out_dir).join(format!("natta_t1.25_s3.{suffix}"));
    let wav = art("wav");
    let annotation = art("annotation.csv");
    let db = art("db.txt");
    assert!(wav.exists() && annotation.exists() && db.exists());
    let wav_s = wav.to_str().unwrap();

    // Slice table.
    let stdout = ok(&["--out-dir", out_dir, "segment", wav_s], root);
    assert!(stdout.contains("slices"));
    let segments_csv = fs::read_to_string(art("segments.csv")).unwrap();
    assert!(segments_csv.lines().count() > 10);

    // Feature matrices.
    ok(&["--out-dir", out_dir, "features", wav_s], root);
    let feat_dir = root.join(out_dir).join("natta_t1.25_s3");
    let mut feature_files: Vec<PathBuf> = fs::read_dir(&feat_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .is_some_and(|n| n.to_string_lossy().starts_with("slice_"))
        })
        .collect();
    feature_files.sort();
    assert!(feature_files.len() >= 28, "{} feature files", feature_files.len());
    let first = fs::read_to_string(&feature_files[0]).unwrap();
    assert_eq!(first.lines().next().unwrap().split(',').count(), 39);

    // Arrange a labeled training layout from the ground truth: slice k of
    // segments.json corresponds to slice_k.csv.
    let slices: Vec<serde_json::Value> = serde_json::from_str(
        &fs::read_to_string(feat_dir.join("segments.json")).unwrap(),
    )
    .unwrap();
    let ann = fs::read_to_string(&annotation).unwrap();
    let rows: Vec<(f64, f64, i64)> = ann
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[3].parse().unwrap(), f[4].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let data_dir = root.join("train-data");
    for file in &feature_files {
        let idx: usize = file
            .file_stem()
            .unwrap()
            .to_string_lossy()
            .trim_start_matches("slice_")
            .parse()
            .unwrap();
        let start = slices[idx]["start"].as_f64().unwrap();
        let end = slices[idx]["end"].as_f64().unwrap();
        let label = rows
            .iter()
            .find(|(s, e, _)| start < *e && *s < end)
            .map(|&(_, _, code)| if code <= 0 { 32 } else { code });
        if let Some(code) = label {
            let class_dir = data_dir.join(code.to_string());
            fs::create_dir_all(&class_dir).unwrap();
            fs::copy(file, class_dir.join(file.file_name().unwrap())).unwrap();
        }
    }

    // Train and classify.
    let stdout = ok(
        &[
            "train-gmm", "--data", "train-data", "--out", "model.json",
            "--components", "3", "--seed", "5",
        ],
        root,
    );
    assert!(stdout.contains("trained"));
    let feature_arg = feature_files[0].to_str().unwrap().to_string();
    let stdout = ok(&["classify", "--model", "model.json", &feature_arg], root);
    assert!(stdout.contains("log-likelihood"));

    // Recognize, tempo, mark beats, evaluate, full run.
    let stdout = ok(
        &["--out-dir", out_dir, "recognize", "--model", "model.json", wav_s],
        root,
    );
    assert!(stdout.contains("Natta"), "recognize output: {stdout}");

    let stdout = ok(
        &["--out-dir", out_dir, "tempo", "--model", "model.json", wav_s],
        root,
    );
    assert!(stdout.contains("comb:") && stdout.contains("selected:"));
    assert!(art("tempo_energies.csv").exists());

    let db_s = db.to_str().unwrap().to_string();
    ok(
        &[
            "--out-dir", out_dir, "mark-beats", "--model", "model.json",
            "--db", &db_s, wav_s,
        ],
        root,
    );
    let marked = art("marked.csv");
    assert!(marked.exists());

    let stdout = ok(
        &[
            "evaluate", "--marked", marked.to_str().unwrap(),
            "--annotation", annotation.to_str().unwrap(),
        ],
        root,
    );
    assert!(stdout.contains("time"), "evaluate output: {stdout}");
    let time_pct: f64 = stdout
        .split('%')
        .next()
        .unwrap()
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(time_pct >= 90.0, "time match {time_pct}");

    let stdout = ok(
        &[
            "--out-dir", out_dir, "run", "--model", "model.json", "--db", &db_s, wav_s,
        ],
        root,
    );
    assert!(stdout.contains("Natta"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(art("report.json")).unwrap())
            .unwrap();
    assert!(report["config_hash"].as_str().unwrap().len() == 64);
    assert_eq!(report["onset_fallback_used"], serde_json::Value::Bool(false));
}

#[test]
fn corrupt_wav_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(root.join("bad.wav"), b"this is not audio").unwrap();
    let out = sollu(&["segment", "bad.wav"], root);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_pattern_is_a_plain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sollu(
        &["synth", "--pattern", "Nope", "--tempo", "1.2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn print_dict_emits_the_builtin_dictionary() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        &["recognize", "--model", "unused.json", "--print-dict"],
        dir.path(),
    );
    assert!(stdout.contains("Natta |"));
    assert!(stdout.contains("Tirmana A |"));
}

#[test]
fn evaluate_missing_file_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = sollu(
        &["evaluate", "--marked", "a.csv", "--annotation", "b.csv"],
        dir.path(),
    );
    assert_ne!(out.status.code(), Some(0));
}
