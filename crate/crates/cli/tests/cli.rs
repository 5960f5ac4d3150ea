use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use zrfl_core::features::read_archive;
use zrfl_core::pairing::read_dataset;

fn zrfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zrfl"))
        .args(args)
        .env_remove("ZR_THREADS")
        .output()
        .expect("spawn zrfl")
}

fn ok(args: &[&str]) -> Output {
    let out = zrfl(args);
    assert!(
        out.status.success(),
        "zrfl {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic corpus; returns its directory.
fn synth(root: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let dir = root.join(name);
    let mut args = vec![
        "synth", "--n-types", "4", "--n-speakers", "4", "--held-out", "2", "--words-per-type", "2",
        "--min-frames", "12", "--max-frames", "20", "--out-dir", s(&dir),
    ];
    args.extend_from_slice(extra);
    if !extra.contains(&"--seed") {
        args.extend_from_slice(&["--seed", "3"]);
    }
    ok(&args);
    dir
}

fn pairs(corpus: &Path, model: &str, out: &Path, extra: &[&str]) -> Output {
    let f = corpus.join("features.zrfa");
    let p = corpus.join("pairs.txt");
    let sp = corpus.join("speakers.txt");
    let mut args = vec![
        "pairs", "--features", s(&f), "--pairs", s(&p), "--speakers", s(&sp), "--model", model, "--out", s(out),
    ];
    args.extend_from_slice(extra);
    ok(&args)
}

fn small_train<'a>(dataset: &'a str, model: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "train", "--dataset", dataset, "--model", model, "--epochs", "2", "--batch-size", "32", "--out", out,
    ];
    args.extend_from_slice(extra);
    args
}

#[test]
fn gradcheck_passes_for_every_model() {
    let out = ok(&["gradcheck"]);
    let text = stdout(&out);
    for name in ["cae", "triamese", "ctriamese"] {
        assert!(text.to_lowercase().contains(name), "{text}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(zrfl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(zrfl(&["train", "--model", "cae"]).status.code(), Some(1));
    assert_eq!(zrfl(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_two() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.zrds");
    let out = tmp.path().join("x.ck");
    let code = zrfl(&small_train(s(&missing), "cae", s(&out), &[])).status.code();
    assert_eq!(code, Some(2));
}

#[test]
fn synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = synth(tmp.path(), "a", &[]);
    let b = synth(tmp.path(), "b", &[]);
    for name in ["features.zrfa", "speakers.txt", "pairs.txt", "words.txt", "abx.txt", "train_words.txt"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let c = synth(tmp.path(), "c", &["--seed", "4"]);
    assert_ne!(std::fs::read(a.join("features.zrfa")).unwrap(), std::fs::read(c.join("features.zrfa")).unwrap());
    assert!(a.join("corpus.manifest.json").exists());
}

#[test]
fn single_speaker_corpus_warns() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("one");
    let out = ok(&["synth", "--n-speakers", "1", "--held-out", "0", "--n-types", "3", "--out-dir", s(&dir)]);
    assert!(stderr(&out).contains("single speaker"), "{}", stderr(&out));
}

#[test]
fn triamese_without_negatives_is_empty_with_warning() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("one");
    ok(&["synth", "--n-speakers", "1", "--held-out", "0", "--n-types", "3", "--out-dir", s(&dir)]);
    // Keep one cluster only, so every candidate negative shares the anchor's label and speaker.
    let text = std::fs::read_to_string(dir.join("pairs.txt")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    let cluster = rows[0].split('\t').next().unwrap();
    let kept: Vec<&str> = rows.iter().copied().filter(|l| l.split('\t').next() == Some(cluster)).collect();
    std::fs::write(dir.join("pairs.txt"), kept.join("\n") + "\n").unwrap();
    let ds = tmp.path().join("t.zrds");
    let out = pairs(&dir, "triamese", &ds, &[]);
    assert!(stderr(&out).contains("empty"), "{}", stderr(&out));
    assert!(read_dataset(&ds).unwrap().is_empty());
}

#[test]
fn full_pipeline() {
    let tmp = TempDir::new().unwrap();
    let corpus = synth(tmp.path(), "corpus", &[]);
    let feats = corpus.join("features.zrfa");

    // Frame pairs in both directions.
    let ds = tmp.path().join("cae.zrds");
    let out = pairs(&corpus, "cae", &ds, &[]);
    let set = read_dataset(&ds).unwrap();
    let line = stdout(&out);
    let counts: Vec<usize> = line.split_whitespace().filter_map(|w| w.parse().ok()).collect();
    assert_eq!(counts.len(), 2, "{line}");
    assert_eq!(set.len(), counts[1]);
    assert_eq!(counts[1] % 2, 0);
    assert!(tmp.path().join("cae.zrds.manifest.json").exists());

    // Training with validation writes a checkpoint, a log and a manifest.
    let ck = tmp.path().join("cae.ck");
    let words = corpus.join("words.txt");
    ok(&small_train(s(&ds), "cae", s(&ck), &["--val-words", s(&words), "--features", s(&feats)]));
    let log = std::fs::read_to_string(tmp.path().join("cae.ck.log.csv")).unwrap();
    let mut rows = log.lines();
    assert_eq!(rows.next(), Some("epoch,loss,val_ap"));
    let rows: Vec<&str> = rows.collect();
    assert!(!rows.is_empty() && rows.len() <= 2, "{log}");
    for r in &rows {
        let fields: Vec<f64> = r.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 3);
        assert!(fields[1].is_finite() && (0.0..=1.0).contains(&fields[2]));
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("cae.ck.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["digest"].as_str().unwrap().len(), 64);
    assert!(manifest["inputs"].as_object().unwrap().contains_key(s(&ds)));

    // Extraction keeps every utterance and its frame count.
    let ext = tmp.path().join("cae.zrfa");
    ok(&["extract", "--checkpoint", s(&ck), "--features", s(&feats), "--model", "cae", "--out", s(&ext)]);
    let before = read_archive(&feats).unwrap();
    let after = read_archive(&ext).unwrap();
    assert_eq!(before.len(), after.len());
    for (x, y) in before.iter().zip(&after) {
        assert_eq!(x.utterance_id, y.utterance_id);
        assert_eq!(x.num_frames(), y.num_frames());
        assert_eq!(y.dim(), 39);
    }

    // Same-different with a PR curve.
    let pr = tmp.path().join("pr.csv");
    let report = tmp.path().join("sd.txt");
    let out = ok(&[
        "eval", "--features", s(&ext), "--list", s(&words), "--task", "samediff", "--pr-csv", s(&pr), "--out",
        s(&report),
    ]);
    assert!(stdout(&out).contains("AP"), "{}", stdout(&out));
    let curve = std::fs::read_to_string(&pr).unwrap();
    assert_eq!(curve.lines().next(), Some("recall,precision"));
    assert!(curve.lines().count() > 2);
    assert!(tmp.path().join("sd.txt.manifest.json").exists());

    // ABX, and a PR curve request for ABX is a usage error.
    let abx = corpus.join("abx.txt");
    let out = ok(&["eval", "--features", s(&ext), "--list", s(&abx), "--task", "abx"]);
    assert!(!stdout(&out).is_empty());
    let code = zrfl(&["eval", "--features", s(&ext), "--list", s(&abx), "--task", "abx", "--pr-csv", s(&pr)]);
    assert_eq!(code.status.code(), Some(1));

    // A checkpoint of the wrong kind.
    let code = zrfl(&["extract", "--checkpoint", s(&ck), "--features", s(&feats), "--model", "triamese", "--out", s(&ext)]);
    assert_eq!(code.status.code(), Some(2));
}

#[test]
fn dataset_kind_mismatch_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let corpus = synth(tmp.path(), "corpus", &[]);
    let ds = tmp.path().join("cae.zrds");
    pairs(&corpus, "cae", &ds, &[]);
    let ck = tmp.path().join("t.ck");
    let out = zrfl(&small_train(s(&ds), "triamese", s(&ck), &[]));
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(!ck.exists());
}

#[test]
fn invalid_flag_combinations_exit_one() {
    let tmp = TempDir::new().unwrap();
    let corpus = synth(tmp.path(), "corpus", &[]);
    let ds = tmp.path().join("t.zrds");
    pairs(&corpus, "triamese", &ds, &[]);
    let ck = tmp.path().join("t.ck");
    let out = zrfl(&small_train(s(&ds), "triamese", s(&ck), &["--speaker-conditioning"]));
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let cae = tmp.path().join("c.zrds");
    pairs(&corpus, "cae", &cae, &[]);
    let out = zrfl(&small_train(s(&cae), "cae", s(&ck), &["--wide"]));
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = TempDir::new().unwrap();
    let corpus = synth(tmp.path(), "corpus", &[]);
    let feats = corpus.join("features.zrfa");
    let run = |threads: &str| -> Vec<Vec<u8>> {
        let dir = tmp.path().join(format!("t{threads}"));
        std::fs::create_dir(&dir).unwrap();
        let ds = dir.join("q.zrds");
        pairs(&corpus, "ctriamese", &ds, &["--threads", threads, "--seed", "9"]);
        let ck = dir.join("q.ck");
        ok(&small_train(s(&ds), "ctriamese", s(&ck), &["--threads", threads, "--seed", "9"]));
        let ext = dir.join("q.zrfa");
        ok(&["--threads", threads, "extract", "--checkpoint", s(&ck), "--features", s(&feats), "--out", s(&ext)]);
        [ds, ck, ext].iter().map(|p| std::fs::read(p).unwrap()).collect()
    };
    assert_eq!(run("1"), run("4"));
}

fn write_tone(path: &Path, seconds: f64, freq: f64) {
    let spec = hound::WavSpec { channels: 1, sample_rate: 16000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    let n = (seconds * 16000.0) as usize;
    for i in 0..n {
        let t = i as f64 / 16000.0;
        let v = 0.3 * (2.0 * std::f64::consts::PI * freq * t).sin() + 0.05 * (2.0 * std::f64::consts::PI * 3.1 * freq * t).sin();
        w.write_sample((v * i16::MAX as f64) as i16).unwrap();
    }
    w.finalize().unwrap();
}

#[test]
fn featurize_wavs() {
    let tmp = TempDir::new().unwrap();
    let wavs = tmp.path().join("wavs");
    std::fs::create_dir(&wavs).unwrap();
    write_tone(&wavs.join("u1.wav"), 1.0, 440.0);
    write_tone(&wavs.join("u2.wav"), 0.5, 700.0);
    let speakers = tmp.path().join("speakers.txt");
    std::fs::write(&speakers, "u1\tspk\nu2\tspk\n").unwrap();

    let out1 = tmp.path().join("f1.zrfa");
    ok(&["featurize", "--wavs", s(&wavs), "--speakers", s(&speakers), "--out", s(&out1)]);
    let seqs = read_archive(&out1).unwrap();
    assert_eq!(seqs.len(), 2);
    assert_eq!(seqs[0].utterance_id, "u1");
    assert_eq!((seqs[0].num_frames(), seqs[0].dim()), (98, 39));
    assert!(seqs.iter().all(|q| q.frames.iter().all(|v| v.is_finite())));

    let out2 = tmp.path().join("f2.zrfa");
    ok(&["featurize", "--wavs", s(&wavs), "--speakers", s(&speakers), "--out", s(&out2)]);
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());

    std::fs::write(&speakers, "u1\tspk\n").unwrap();
    let bad = zrfl(&["featurize", "--wavs", s(&wavs), "--speakers", s(&speakers), "--out", s(&out2)]);
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("u2"), "{}", stderr(&bad));
}
