//! Artifact emission for experiment runs: CSV tables and the results.json
//! summary.
//!
//! All floats are written with Rust's shortest-round-trip `Display`
//! formatting, so re-reading a file recovers bitwise-identical values. Every
//! writer produces identical bytes for identical inputs; the only
//! non-reproducible fields are the wall-time entries in results.json.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use super::{ExperimentConfig, PredictionRow, RunResult, SweepRow};
use crate::nssl::EpochTrace;
use crate::{Error, Result};

/// Opens `path` for buffered writing, tagging failures with the path.
pub(super) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Wraps an I/O failure on `path` into the crate error type.
pub(super) fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `predictions.csv`: one row per scored sample per run.
pub(super) fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "run,sample_id,true_label,predicted_label,confidence")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.run, r.sample_id, r.true_label, r.predicted_label, r.confidence
            )?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

/// Writes `traces.csv`: the epoch/sub-step confidence and accuracy series of
/// every run.
pub(super) fn write_traces(path: &Path, traces: &[(usize, EpochTrace)]) -> Result<()> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(
            w,
            "run,epoch,substep,mean_confidence,cluster_accuracy,test_accuracy"
        )?;
        for (run, t) in traces {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                run, t.epoch, t.substep, t.mean_confidence, t.cluster_accuracy, t.test_accuracy
            )?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

/// Writes a sweep table with the pinned `beta,n,seed,accuracy` columns.
pub(super) fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "beta,n,seed,accuracy")?;
        for r in rows {
            writeln!(w, "{},{},{},{}", r.beta, r.n, r.seed, r.accuracy)?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

/// Writes `results.json`: the full effective configuration, per-run metrics,
/// and aggregate statistics. Sweep modes additionally get a per-grid-point
/// summary.
pub(super) fn write_results(
    path: &Path,
    cfg: &ExperimentConfig,
    p_classes: usize,
    result: &RunResult,
    wall_seconds_total: f64,
) -> Result<()> {
    let mut doc = json!({
        "config": cfg,
        "p_classes": p_classes,
        "mean_accuracy": result.mean_accuracy,
        "std_accuracy": result.std_accuracy,
        "runs": result.records,
        "wall_seconds_total": wall_seconds_total,
    });
    if !result.sweep.is_empty() {
        doc["sweep_summary"] = json!(sweep_summary(&result.sweep));
    }
    let w = create(path)?;
    serde_json::to_writer_pretty(w, &doc).map_err(|e| match e.io_error_kind() {
        Some(kind) => io_err(path, std::io::Error::new(kind, e.to_string())),
        None => Error::Config(format!("results serialization failed: {e}")),
    })
}

/// Mean/std accuracy per (β, N) grid point, in first-appearance order.
fn sweep_summary(rows: &[SweepRow]) -> Vec<serde_json::Value> {
    let mut order: Vec<(f64, usize)> = Vec::new();
    for r in rows {
        if !order.iter().any(|&(b, n)| b == r.beta && n == r.n) {
            order.push((r.beta, r.n));
        }
    }
    order
        .into_iter()
        .map(|(beta, n)| {
            let accuracies: Vec<f64> = rows
                .iter()
                .filter(|r| r.beta == beta && r.n == n)
                .map(|r| r.accuracy)
                .collect();
            let (mean, std) = mean_std(&accuracies);
            json!({
                "beta": beta,
                "n": n,
                "mean_accuracy": mean,
                "std_accuracy": std,
            })
        })
        .collect()
}

/// Mean and sample standard deviation (n − 1 denominator; 0 when there are
/// fewer than two values).
pub(super) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}
