use std::path::Path;
use std::process::{Command, Output};

fn ridgelive(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ridgelive"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

/// Synthetic dataset plus a manifest restricted to its first `n` records.
fn dataset(dir: &Path, per_class: &str, n: usize) {
    let o = ridgelive(dir, &["synth", "dataset", "ds", "--per-class", per_class, "--seed", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let all = lines(&dir.join("ds/manifest.tsv"));
    std::fs::write(dir.join("small.tsv"), all[..=n].join("\n") + "\n").unwrap();
}

#[test]
fn extract_writes_one_line_per_image() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), "5", 5);
    let o = ridgelive(dir.path(), &["extract", "--manifest", "small.tsv", "--out", "f.tsv", "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = lines(&dir.path().join("f.tsv"));
    assert_eq!(f.len(), 6);
    assert!(f[0].starts_with('#'));
    assert!(f[1..].iter().all(|l| l.split('\t').count() == 19));
}

#[test]
fn one_corrupt_image_in_ten_is_tolerated() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), "5", 10);
    let victim = lines(&dir.path().join("small.tsv"))[3].split('\t').next().unwrap().to_string();
    std::fs::write(dir.path().join(&victim), b"not an image").unwrap();
    let o = ridgelive(dir.path(), &["extract", "--manifest", "small.tsv", "--out", "f.tsv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(lines(&dir.path().join("f.tsv")).len(), 10);
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.matches("failed\t").count(), 1, "{err}");
    assert!(err.contains(&victim));

    let second = lines(&dir.path().join("small.tsv"))[4].split('\t').next().unwrap().to_string();
    std::fs::write(dir.path().join(second), b"").unwrap();
    let o = ridgelive(dir.path(), &["extract", "--manifest", "small.tsv", "--out", "g.tsv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn empty_manifest_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.tsv"), "#path\tlabel\tmaterial\tsensor\tsplit\n").unwrap();
    let o = ridgelive(dir.path(), &["extract", "--manifest", "empty.tsv", "--out", "f.tsv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ridgelive(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&ridgelive(dir.path(), &["extract", "--manifest", "m.tsv"])), 1);
    assert_eq!(code(&ridgelive(dir.path(), &["eval", "--threshold", "2", "--scores", "s.tsv"])), 1);
    assert_eq!(code(&ridgelive(dir.path(), &["--help"])), 0);
}

#[test]
fn staged_run_with_leakage_guard() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    dataset(d, "12", 24);
    let run = |args: &[&str]| {
        let o = ridgelive(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    run(&["summarize", "--manifest", "ds/manifest.tsv"]);
    run(&["extract", "--manifest", "ds/manifest.tsv", "--split", "train", "--out", "train.tsv"]);
    run(&["extract", "--manifest", "ds/manifest.tsv", "--out", "all.tsv"]);

    let o = ridgelive(d, &["select", "--features", "all.tsv", "--out", "x.txt", "--trees", "10"]);
    assert_eq!(code(&o), 3);
    assert!(!d.join("x.txt").exists());

    run(&["select", "--features", "train.tsv", "--out", "subset.txt", "--trees", "20", "--max-dim", "4"]);
    assert!(lines(&d.join("subset.txt"))[0].starts_with("mask\t"));
    run(&["train", "--features", "train.tsv", "--subset", "subset.txt", "--out", "model.txt", "--trees", "20"]);
    run(&["score", "--model", "model.txt", "--features", "all.tsv", "--out", "scores.tsv"]);
    assert_eq!(lines(&d.join("scores.tsv")).len(), 1 + 12);

    run(&["sweep", "--scores", "scores.tsv", "--out", "sweep.tsv"]);
    assert_eq!(lines(&d.join("sweep.tsv")).len(), 101);
    let a = run(&["eval", "--scores", "scores.tsv"]);
    let b = run(&["eval", "--model", "model.txt", "--features", "all.tsv"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).contains("synthetic\t0.50\t6\t6\t"));

    let o = ridgelive(d, &["eval", "--scores", "missing.tsv"]);
    assert_eq!(code(&o), 2);
    std::fs::write(d.join("model.txt"), "ridgelive-forest 1\ntrees\t3\n").unwrap();
    let o = ridgelive(d, &["score", "--model", "model.txt", "--features", "all.tsv", "--out", "s2.tsv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn stripes_image_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = ridgelive(dir.path(), &["synth", "stripes", "--out", "s.pgm", "--size", "64", "--orientation", "0.5"]);
    assert_eq!(code(&o), 0);
    let g = ridgelive::ingest::load_image(dir.path().join("s.pgm")).unwrap();
    assert_eq!((g.width(), g.height()), (64, 64));
}
