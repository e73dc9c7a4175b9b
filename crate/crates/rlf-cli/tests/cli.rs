//! End-to-end tests of the `rlf` binary: exit codes and artifact emission.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rlf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlf"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn rlf binary")
}

/// Two separable 3-feature blobs, 12 samples per class, as a labeled CSV.
fn blob_csv(dir: &Path) -> PathBuf {
    let mut text = String::new();
    for class in 0..2 {
        let base = if class == 0 { 0.15 } else { 0.85 };
        for i in 0..12 {
            let jitter = i as f64 * 0.004;
            text.push_str(&format!(
                "{},{},{},{class}\n",
                base + jitter,
                base - jitter,
                base + 2.0 * jitter
            ));
        }
    }
    let path = dir.join("blobs.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn nsl_run_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = blob_csv(dir.path());
    let out = rlf(
        &[
            "nsl",
            "--csv",
            csv.to_str().unwrap(),
            "--labels-per-class",
            "3",
            "--test-count",
            "6",
            "--out-dir",
            "out",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean accuracy"), "stdout: {stdout}");
    assert!(dir.path().join("out/results.json").exists());
    assert!(dir.path().join("out/predictions.csv").exists());
}

#[test]
fn missing_data_source_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlf(&["nsl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no dataset"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlf(&["nsl", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2), "clap usage errors exit 2");
}

#[test]
fn unreadable_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rlf(&["nsl", "--csv", "does-not-exist.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "0.5,0.5,0\n0.5,oops,1\n").unwrap();
    let out = rlf(&["nsl", "--csv", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}

#[test]
fn labeled_unsup_combination_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = blob_csv(dir.path());
    let out = rlf(
        &[
            "unsup",
            "--csv",
            csv.to_str().unwrap(),
            "--labels-per-class",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels-per-class"));
}

#[test]
fn baseline_kmeans_runs_unsupervised() {
    let dir = tempfile::tempdir().unwrap();
    let csv = blob_csv(dir.path());
    let out = rlf(
        &[
            "baseline",
            "kmeans",
            "--csv",
            csv.to_str().unwrap(),
            "--test-count",
            "0",
            "--iterations",
            "50",
            "--out-dir",
            "km",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean accuracy 1.0000"));
}

#[test]
fn sweep_beta_writes_the_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = blob_csv(dir.path());
    let out = rlf(
        &[
            "sweep-beta",
            "--csv",
            csv.to_str().unwrap(),
            "--labels-per-class",
            "3",
            "--test-count",
            "6",
            "--beta",
            "1.3",
            "--beta",
            "10",
            "--repeats",
            "2",
            "--out-dir",
            "sweep",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.path().join("sweep/sweep_beta.csv")).unwrap();
    assert!(table.starts_with("beta,n,seed,accuracy\n"));
    assert_eq!(table.lines().count(), 1 + 4, "2 betas x 2 repeats");
}
