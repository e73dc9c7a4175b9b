//! Experiment orchestration: seeded repeated runs of every classifier and
//! clusterer in the crate, with CSV/JSON artifact emission.
//!
//! A single entry point, [`run`], drives one experiment described by an
//! [`ExperimentConfig`]: it loads the dataset, executes `repeats` independent
//! runs with consecutive seeds, and writes `results.json` (full effective
//! configuration plus per-run and aggregate metrics) alongside the
//! mode-specific tables — `predictions.csv`, `traces.csv`, sweep tables, and
//! optionally `effective_vectors.csv`. Everything except the wall-time fields
//! is bitwise reproducible for a fixed configuration.

mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    kmeans, knn_predict_batch, naive_bayes_fit, spectral_clustering, KmeansConfig, KnnConfig,
    Metric, SigmaSpec, SpectralConfig,
};
use crate::classifier::{classify, nsl_fit, nsl_predict_batch, ClusterSet};
use crate::data::{load_csv, load_idx, stratified_split, Dataset, Split, SplitSpec};
use crate::nssl::{
    align_labels_hungarian, contingency_table, run_nssl, run_unsupervised, EpochTrace, EvalData,
    NsslConfig,
};
use crate::pairwise::{into_rlf, log_fid_matrix};
use crate::qkernel::{KernelConfig, Sample, SampleId};
use crate::{classifier, Error, Result};

/// Offset added to test-set sample ids so they can never collide with
/// training ids inside one experiment.
pub const TEST_ID_BASE: u64 = 1_000_000;

/// Reference baseline run by [`Mode::Baseline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Knn,
    NaiveBayes,
    Kmeans,
    Spectral,
}

/// What one experiment measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Supervised RLF classification of the test subset.
    Nsl,
    /// Semi-supervised training on the unlabeled pool, then test scoring.
    Nssl,
    /// Fully unsupervised clustering, scored by Hungarian alignment.
    Unsup,
    /// One of the reference methods.
    Baseline(BaselineMethod),
    /// NSL accuracy across a grid of β values.
    SweepBeta,
    /// NSL accuracy across a grid of labeled-set sizes.
    SweepN,
    /// NSSL with per-sub-step traces as the primary artifact.
    TraceEpochs,
}

/// Where the samples come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// MNIST-style IDX pairs; the test set is re-based by [`TEST_ID_BASE`].
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    /// One labeled CSV; labeled/pool/test partitions are all drawn from it.
    Csv { path: PathBuf },
}

/// Full description of one experiment. Every field is echoed into
/// `results.json`, so the artifact alone suffices to re-run bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub data: DataSource,
    /// Partition sizes and the base seed; run r uses `rng_seed + r`.
    pub split: SplitSpec,
    pub kernel: KernelConfig,
    pub nssl: NsslConfig,
    /// Neighbour count for the k-NN baseline.
    pub knn_k: usize,
    /// Lloyd iteration budget for the k-means baseline.
    pub kmeans_iterations: usize,
    /// Cluster count for the unsupervised baselines; `None` = number of
    /// classes.
    pub cluster_k: Option<usize>,
    /// Subsample entering the spectral eigendecomposition.
    pub spectral_subsample: usize,
    /// Fixed spectral bandwidth; `None` = median heuristic.
    pub spectral_sigma: Option<f64>,
    /// β grid for [`Mode::SweepBeta`].
    pub beta_grid: Vec<f64>,
    /// Labels-per-class grid for [`Mode::SweepN`].
    pub n_grid: Vec<usize>,
    /// Independent seeded runs.
    pub repeats: usize,
    pub out_dir: PathBuf,
    /// Also write `effective_vectors.csv` from the first run.
    pub emit_effective_vectors: bool,
}

/// β sweep grid from the reference protocol: 1.0 to 2.0 in steps of 0.1,
/// then 3, 5, 10.
pub fn default_beta_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (10..=20).map(|i| i as f64 / 10.0).collect();
    grid.extend([3.0, 5.0, 10.0]);
    grid
}

/// N sweep grid from the reference protocol.
pub fn default_n_grid() -> Vec<usize> {
    vec![6, 10, 20, 50, 100, 240]
}

impl ExperimentConfig {
    /// Validates everything checkable without touching the dataset, so a
    /// bad configuration fails before any compute.
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        self.nssl.validate()?;
        match self.mode {
            Mode::Nsl | Mode::Nssl | Mode::TraceEpochs | Mode::SweepBeta => {
                self.require_labels()?;
            }
            Mode::Baseline(BaselineMethod::Knn) => {
                self.require_labels()?;
                if self.knn_k == 0 {
                    return Err(Error::Config("knn baseline requires k >= 1".into()));
                }
            }
            Mode::Baseline(BaselineMethod::NaiveBayes) => self.require_labels()?,
            Mode::Unsup | Mode::Baseline(BaselineMethod::Kmeans | BaselineMethod::Spectral) => {
                if self.split.labels_per_class != 0 {
                    return Err(Error::Config(format!(
                        "mode {:?} clusters the unlabeled pool; set labels-per-class to 0 \
                         instead of {}",
                        self.mode, self.split.labels_per_class
                    )));
                }
                if self.cluster_k == Some(0) {
                    return Err(Error::Config("cluster count must be at least 1".into()));
                }
                if self.mode == Mode::Baseline(BaselineMethod::Kmeans)
                    && self.kmeans_iterations == 0
                {
                    return Err(Error::Config("k-means requires iterations >= 1".into()));
                }
            }
            Mode::SweepN => {
                if self.n_grid.is_empty() {
                    return Err(Error::Config("sweep-n requires a non-empty N grid".into()));
                }
                if self.n_grid.contains(&0) {
                    return Err(Error::Config("sweep-n grid entries must be >= 1".into()));
                }
            }
        }
        if self.mode == Mode::SweepBeta {
            if self.beta_grid.is_empty() {
                return Err(Error::Config("sweep-beta requires a non-empty β grid".into()));
            }
            for &beta in &self.beta_grid {
                // Each grid point must form a valid kernel configuration.
                KernelConfig::new(beta, self.kernel.epsilon(), self.kernel.sigma())?;
            }
        }
        Ok(())
    }

    fn require_labels(&self) -> Result<()> {
        if self.split.labels_per_class == 0 {
            return Err(Error::Config(format!(
                "mode {:?} needs labeled samples; labels-per-class must be >= 1",
                self.mode
            )));
        }
        Ok(())
    }

    /// The split for run `r`: identical sizes, seed advanced to
    /// `rng_seed + r`.
    fn split_for_run(&self, r: usize) -> SplitSpec {
        SplitSpec {
            rng_seed: self.split.rng_seed.wrapping_add(r as u64),
            ..self.split.clone()
        }
    }
}

/// One scored sample: a line of `predictions.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionRow {
    pub run: usize,
    pub sample_id: u64,
    pub true_label: usize,
    pub predicted_label: usize,
    pub confidence: f64,
}

/// One line of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub n: usize,
    pub seed: u64,
    pub accuracy: f64,
}

/// Metrics of one seeded run.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    /// Fraction of correct predictions; Hungarian-aligned for the
    /// unsupervised modes.
    pub accuracy: f64,
    /// Per true class: correct / present (1.0 for classes absent from the
    /// scored set).
    pub per_class_accuracy: Vec<f64>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub wall_seconds: f64,
}

/// Everything [`run`] computed, mirroring the written artifacts.
#[derive(Debug)]
pub struct RunResult {
    pub records: Vec<RunRecord>,
    /// Mean accuracy: over runs, or over sweep rows in the sweep modes.
    pub mean_accuracy: f64,
    /// Sample standard deviation (n − 1) of the same accuracies.
    pub std_accuracy: f64,
    /// Sweep table; empty outside the sweep modes.
    pub sweep: Vec<SweepRow>,
    /// `(run, trace)` rows; empty outside the NSSL/unsupervised modes.
    pub traces: Vec<(usize, EpochTrace)>,
    /// All `predictions.csv` rows; empty in the sweep modes.
    pub predictions: Vec<PredictionRow>,
}

/// Runs one experiment end to end and writes its artifacts into
/// `cfg.out_dir`.
///
/// Run `r` derives every seed from `cfg.split.rng_seed + r`: the partition
/// draw and, where applicable, the clustering seed. Supervised modes score
/// the test subset; unsupervised modes cluster the pool and score it against
/// the withheld ground truth after Hungarian alignment.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let (train, test_src) = load_data(&cfg.data)?;
    let p = train.p();

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| report::io_err(&cfg.out_dir, e))?;

    let mut result = match cfg.mode {
        Mode::Nsl => run_nsl_mode(cfg, &train, test_src.as_ref(), p)?,
        Mode::Nssl | Mode::TraceEpochs => run_nssl_mode(cfg, &train, test_src.as_ref(), p)?,
        Mode::Unsup => run_unsup_mode(cfg, &train, test_src.as_ref(), p)?,
        Mode::Baseline(method) => run_baseline_mode(cfg, &train, test_src.as_ref(), p, method)?,
        Mode::SweepBeta => run_sweep_beta_mode(cfg, &train, test_src.as_ref(), p)?,
        Mode::SweepN => run_sweep_n_mode(cfg, &train, test_src.as_ref(), p)?,
    };

    let accuracies: Vec<f64> = if result.sweep.is_empty() {
        result.records.iter().map(|r| r.accuracy).collect()
    } else {
        result.sweep.iter().map(|r| r.accuracy).collect()
    };
    let (mean, std) = report::mean_std(&accuracies);
    result.mean_accuracy = mean;
    result.std_accuracy = std;

    if !result.predictions.is_empty() {
        report::write_predictions(&cfg.out_dir.join("predictions.csv"), &result.predictions)?;
    }
    if !result.traces.is_empty() {
        report::write_traces(&cfg.out_dir.join("traces.csv"), &result.traces)?;
    }
    if !result.sweep.is_empty() {
        let name = match cfg.mode {
            Mode::SweepBeta => "sweep_beta.csv",
            _ => "sweep_n.csv",
        };
        report::write_sweep(&cfg.out_dir.join(name), &result.sweep)?;
    }
    report::write_results(
        &cfg.out_dir.join("results.json"),
        cfg,
        p,
        &result,
        started.elapsed().as_secs_f64(),
    )?;
    Ok(result)
}

/// Writes the effective vector of every test sample against `cs` as CSV with
/// columns `sample_id,true_label,y_0,…,y_{P-1}`.
///
/// Values use shortest-round-trip formatting, so re-reading the file
/// recovers them bitwise. Errors if a test sample carries no label.
pub fn emit_effective_vectors(cs: &ClusterSet, test: &[Sample], path: &Path) -> Result<()> {
    let predictions = nsl_predict_batch(test, cs)?;
    let mut w = report::create(path)?;
    use std::io::Write;
    let mut emit = || -> std::io::Result<()> {
        write!(w, "sample_id,true_label")?;
        for c in 0..cs.p() {
            write!(w, ",y_{c}")?;
        }
        writeln!(w)?;
        for (s, pred) in test.iter().zip(&predictions) {
            let label = s.label().ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("sample {} has no label", s.id().0),
                )
            })?;
            write!(w, "{},{label}", s.id().0)?;
            for v in pred.effective.values() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    emit().map_err(|e| report::io_err(path, e))
}

/// Loads the configured dataset(s); IDX test ids are re-based so train and
/// test ids never collide.
fn load_data(source: &DataSource) -> Result<(Dataset, Option<Dataset>)> {
    match source {
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx(train_images, train_labels)?;
            let mut test = load_idx(test_images, test_labels)?;
            test.offset_ids(TEST_ID_BASE);
            Ok((train, Some(test)))
        }
        DataSource::Csv { path } => Ok((load_csv(path, true)?, None)),
    }
}

/// Supervised RLF classification, one fit/predict per repeat.
fn run_nsl_mode(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test_src: Option<&Dataset>,
    p: usize,
) -> Result<RunResult> {
    let mut result = RunResult::empty();
    for r in 0..cfg.repeats {
        let started = Instant::now();
        let spec = cfg.split_for_run(r);
        let split = stratified_split(train, test_src, &spec)?;
        let cs = nsl_fit(&split.labeled, p, cfg.kernel)?;
        let predictions = nsl_predict_batch(&split.test, &cs)?;
        let rows = prediction_rows(
            r,
            &split.test,
            predictions
                .iter()
                .map(|pred| (pred.class_index, pred.confidence)),
        )?;
        if r == 0 && cfg.emit_effective_vectors {
            emit_effective_vectors(&cs, &split.test, &cfg.out_dir.join("effective_vectors.csv"))?;
        }
        result.push_run(r, spec.rng_seed, rows, p, started.elapsed().as_secs_f64());
    }
    Ok(result)
}

/// Semi-supervised training, then test scoring; also records epoch traces.
fn run_nssl_mode(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test_src: Option<&Dataset>,
    p: usize,
) -> Result<RunResult> {
    let mut result = RunResult::empty();
    for r in 0..cfg.repeats {
        let started = Instant::now();
        let spec = cfg.split_for_run(r);
        let split = stratified_split(train, test_src, &spec)?;
        let ncfg = NsslConfig {
            rng_seed: spec.rng_seed,
            ..cfg.nssl.clone()
        };
        let eval = EvalData {
            test: &split.test,
            ground_truth: &split.ground_truth,
        };
        let (cs, traces) = run_nssl(
            &split.labeled,
            &split.unlabeled,
            p,
            &cfg.kernel,
            &ncfg,
            Some(eval),
        )?;
        result.traces.extend(traces.into_iter().map(|t| (r, t)));
        let predictions = nsl_predict_batch(&split.test, &cs)?;
        let rows = prediction_rows(
            r,
            &split.test,
            predictions
                .iter()
                .map(|pred| (pred.class_index, pred.confidence)),
        )?;
        if r == 0 && cfg.emit_effective_vectors {
            emit_effective_vectors(&cs, &split.test, &cfg.out_dir.join("effective_vectors.csv"))?;
        }
        result.push_run(r, spec.rng_seed, rows, p, started.elapsed().as_secs_f64());
    }
    Ok(result)
}

/// Fully unsupervised clustering of the pool, scored by Hungarian-aligned
/// pool accuracy.
fn run_unsup_mode(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test_src: Option<&Dataset>,
    p: usize,
) -> Result<RunResult> {
    let mut result = RunResult::empty();
    for r in 0..cfg.repeats {
        let started = Instant::now();
        let spec = cfg.split_for_run(r);
        let split = stratified_split(train, test_src, &spec)?;
        let ncfg = NsslConfig {
            rng_seed: spec.rng_seed,
            ..cfg.nssl.clone()
        };
        let eval = EvalData {
            test: &split.test,
            ground_truth: &split.ground_truth,
        };
        let (cs, traces) =
            run_unsupervised(&split.unlabeled, p, &cfg.kernel, &ncfg, Some(eval))?;
        result.traces.extend(traces.into_iter().map(|t| (r, t)));
        let alignment = cluster_alignment(&cs, &split.ground_truth, p)?;
        let rows = cluster_member_rows(r, &cs, &split.ground_truth, &alignment)?;
        if r == 0 && cfg.emit_effective_vectors {
            emit_effective_vectors(&cs, &split.test, &cfg.out_dir.join("effective_vectors.csv"))?;
        }
        result.push_run(r, spec.rng_seed, rows, p, started.elapsed().as_secs_f64());
    }
    Ok(result)
}

/// One of the reference methods under the same split protocol.
fn run_baseline_mode(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test_src: Option<&Dataset>,
    p: usize,
    method: BaselineMethod,
) -> Result<RunResult> {
    let mut result = RunResult::empty();
    for r in 0..cfg.repeats {
        let started = Instant::now();
        let spec = cfg.split_for_run(r);
        let split = stratified_split(train, test_src, &spec)?;
        let rows = match method {
            BaselineMethod::Knn => {
                let knn = KnnConfig {
                    k: cfg.knn_k,
                    metric: Metric::Euclidean,
                    kernel: cfg.kernel,
                };
                let classes = knn_predict_batch(&split.test, &split.labeled, &knn)?;
                // k-NN votes are hard assignments; report full confidence.
                prediction_rows(r, &split.test, classes.into_iter().map(|c| (c, 1.0)))?
            }
            BaselineMethod::NaiveBayes => {
                let model = naive_bayes_fit(&split.labeled, p)?;
                let mut scored = Vec::with_capacity(split.test.len());
                for s in &split.test {
                    let posterior = model.posterior(s)?;
                    let class = model.predict(s)?;
                    scored.push((class, posterior[class]));
                }
                prediction_rows(r, &split.test, scored.into_iter())?
            }
            BaselineMethod::Kmeans => {
                let km = KmeansConfig {
                    k: scorable_k(cfg.cluster_k, p)?,
                    iterations: cfg.kmeans_iterations,
                    rng_seed: spec.rng_seed,
                };
                let assignments = kmeans(&split.unlabeled, &km)?;
                aligned_assignment_rows(r, &split, &assignments, p)?
            }
            BaselineMethod::Spectral => {
                let sc = SpectralConfig {
                    k: scorable_k(cfg.cluster_k, p)?,
                    sigma: match cfg.spectral_sigma {
                        Some(v) => SigmaSpec::Fixed(v),
                        None => SigmaSpec::MedianHeuristic,
                    },
                    subsample: cfg.spectral_subsample,
                    rng_seed: spec.rng_seed,
                };
                let assignments = spectral_clustering(&split.unlabeled, &sc)?;
                aligned_assignment_rows(r, &split, &assignments, p)?
            }
        };
        result.push_run(r, spec.rng_seed, rows, p, started.elapsed().as_secs_f64());
    }
    Ok(result)
}

/// NSL accuracy across the β grid. The log-fidelity matrix is β-independent,
/// so each repeat computes it once and rescales per grid point; the scores
/// are bitwise-identical to a direct run at each β.
fn run_sweep_beta_mode(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test_src: Option<&Dataset>,
    p: usize,
) -> Result<RunResult> {
    let mut result = RunResult::empty();
    for r in 0..cfg.repeats {
        let spec = cfg.split_for_run(r);
        let split = stratified_split(train, test_src, &spec)?;
        let truths = test_truths(&split.test)?;
        // Member order depends only on the labels, never on β.
        let cs = nsl_fit(&split.labeled, p, cfg.kernel)?;
        let (members, ranges) = cs.member_rows();
        let log_fid = log_fid_matrix(&split.test, &members, cfg.kernel.epsilon());
        for &beta in &cfg.beta_grid {
            let rlf = into_rlf(log_fid.clone(), beta);
            let mut correct = 0usize;
            for (i, &truth) in truths.iter().enumerate() {
                let pred = classify(classifier::ev_from_rlf_row(rlf.row(i), &ranges));
                if pred.class_index == truth {
                    correct += 1;
                }
            }
            result.sweep.push(SweepRow {
                beta,
                n: cfg.split.labels_per_class,
                seed: spec.rng_seed,
                accuracy: vacuous_ratio(correct, truths.len()),
            });
        }
    }
    Ok(result)
}

/// NSL accuracy across the labeled-set-size grid at the configured β.
fn run_sweep_n_mode(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test_src: Option<&Dataset>,
    p: usize,
) -> Result<RunResult> {
    let mut result = RunResult::empty();
    for &n in &cfg.n_grid {
        for r in 0..cfg.repeats {
            let spec = SplitSpec {
                labels_per_class: n,
                ..cfg.split_for_run(r)
            };
            let split = stratified_split(train, test_src, &spec)?;
            let truths = test_truths(&split.test)?;
            let cs = nsl_fit(&split.labeled, p, cfg.kernel)?;
            let predictions = nsl_predict_batch(&split.test, &cs)?;
            let correct = predictions
                .iter()
                .zip(&truths)
                .filter(|(pred, &truth)| pred.class_index == truth)
                .count();
            result.sweep.push(SweepRow {
                beta: cfg.kernel.beta(),
                n,
                seed: spec.rng_seed,
                accuracy: vacuous_ratio(correct, truths.len()),
            });
        }
    }
    Ok(result)
}

impl RunResult {
    fn empty() -> Self {
        RunResult {
            records: Vec::new(),
            mean_accuracy: 0.0,
            std_accuracy: 0.0,
            sweep: Vec::new(),
            traces: Vec::new(),
            predictions: Vec::new(),
        }
    }

    /// Folds one run's scored rows into a record and the prediction table.
    fn push_run(
        &mut self,
        run: usize,
        seed: u64,
        rows: Vec<PredictionRow>,
        p: usize,
        wall_seconds: f64,
    ) {
        let mut confusion = vec![vec![0usize; p]; p];
        for row in &rows {
            confusion[row.true_label][row.predicted_label] += 1;
        }
        let correct: usize = (0..p).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = (0..p)
            .map(|c| {
                let total: usize = confusion[c].iter().sum();
                vacuous_ratio(confusion[c][c], total)
            })
            .collect();
        self.records.push(RunRecord {
            run,
            seed,
            accuracy: vacuous_ratio(correct, rows.len()),
            per_class_accuracy,
            confusion,
            wall_seconds,
        });
        self.predictions.extend(rows);
    }
}

/// `correct / total`, defined as 1.0 on an empty denominator (nothing was
/// scored, so nothing was wrong).
fn vacuous_ratio(correct: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    }
}

/// True labels of the test subset; errors if any sample is unlabeled.
fn test_truths(test: &[Sample]) -> Result<Vec<usize>> {
    test.iter()
        .map(|s| {
            s.label().ok_or_else(|| {
                Error::Config(format!(
                    "test sample {} has no label; accuracy needs labeled test data",
                    s.id().0
                ))
            })
        })
        .collect()
}

/// Builds prediction rows for test-scored modes.
fn prediction_rows(
    run: usize,
    test: &[Sample],
    scored: impl Iterator<Item = (usize, f64)>,
) -> Result<Vec<PredictionRow>> {
    let truths = test_truths(test)?;
    Ok(test
        .iter()
        .zip(&truths)
        .zip(scored)
        .map(|((s, &truth), (class, confidence))| PredictionRow {
            run,
            sample_id: s.id().0,
            true_label: truth,
            predicted_label: class,
            confidence,
        })
        .collect())
}

/// Hungarian-optimal cluster→class mapping for a finished cluster set.
fn cluster_alignment(
    cs: &ClusterSet,
    ground_truth: &BTreeMap<SampleId, usize>,
    p: usize,
) -> Result<Vec<usize>> {
    let table = square_table(contingency_table(cs, ground_truth, p), p);
    align_labels_hungarian(&table)
}

/// Pads a contingency table with zero rows so cluster and class counts
/// match; the Hungarian step requires a square matrix.
fn square_table(mut table: Vec<Vec<usize>>, p: usize) -> Vec<Vec<usize>> {
    while table.len() < p {
        table.push(vec![0; p]);
    }
    table
}

/// Prediction rows for the pool members of an unsupervised cluster set,
/// with cluster indices translated through `alignment`. Each member's
/// confidence is its stored assignment-time η.
fn cluster_member_rows(
    run: usize,
    cs: &ClusterSet,
    ground_truth: &BTreeMap<SampleId, usize>,
    alignment: &[usize],
) -> Result<Vec<PredictionRow>> {
    let mut rows = Vec::new();
    for cluster in cs.clusters() {
        for pm in cluster.pseudo_members() {
            let id = pm.sample.id();
            let truth = *ground_truth.get(&id).ok_or_else(|| {
                Error::Config(format!("pool sample {} has no recorded ground truth", id.0))
            })?;
            rows.push(PredictionRow {
                run,
                sample_id: id.0,
                true_label: truth,
                predicted_label: alignment[cluster.class_index()],
                confidence: pm.confidence,
            });
        }
    }
    Ok(rows)
}

/// Effective cluster count for the unsupervised baselines. Scoring maps
/// clusters onto classes, so more clusters than classes cannot be aligned.
fn scorable_k(cluster_k: Option<usize>, p: usize) -> Result<usize> {
    let k = cluster_k.unwrap_or(p);
    if k > p {
        return Err(Error::Config(format!(
            "cluster count {k} exceeds the {p} classes it would be scored against"
        )));
    }
    Ok(k)
}

/// Prediction rows for a flat assignment vector (k-means/spectral), aligned
/// to classes by the Hungarian step on its contingency table. Cluster
/// indices are below `p`, so the padded table is square.
fn aligned_assignment_rows(
    run: usize,
    split: &Split,
    assignments: &[usize],
    p: usize,
) -> Result<Vec<PredictionRow>> {
    let mut table = vec![vec![0usize; p]; p];
    for (s, &cluster) in split.unlabeled.iter().zip(assignments) {
        let truth = *split.ground_truth.get(&s.id()).ok_or_else(|| {
            Error::Config(format!(
                "pool sample {} has no recorded ground truth",
                s.id().0
            ))
        })?;
        table[cluster][truth] += 1;
    }
    let alignment = align_labels_hungarian(&table)?;
    split
        .unlabeled
        .iter()
        .zip(assignments)
        .map(|(s, &cluster)| {
            Ok(PredictionRow {
                run,
                sample_id: s.id().0,
                true_label: split.ground_truth[&s.id()],
                predicted_label: alignment[cluster],
                confidence: 1.0,
            })
        })
        .collect()
}
