//! Command-line front end for the `rlf` experiment harness.
//!
//! One subcommand per experiment mode; every run writes `results.json` plus
//! the mode's CSV tables into `--out-dir`. Exit codes separate failure
//! classes so scripts can react: 0 success, 2 usage/configuration error,
//! 3 data or I/O error, 4 numeric error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rlf::data::{CountSpec, SplitSpec};
use rlf::harness::{
    self, default_beta_grid, default_n_grid, BaselineMethod, DataSource, ExperimentConfig, Mode,
};
use rlf::nssl::NsslConfig;
use rlf::qkernel::KernelConfig;
use rlf::Error;

#[derive(Parser)]
#[command(
    name = "rlf",
    version,
    about = "Rescaled-logarithmic-fidelity classification experiments",
    after_help = "Artifacts: results.json (config echo, per-run metrics, mean/std) plus \
                  predictions.csv, traces.csv, sweep_beta.csv or sweep_n.csv as the mode \
                  dictates. Outputs are bit-reproducible for a fixed seed, excluding the \
                  wall-time fields.\n\nThe unlabeled pool is sized automatically: the \
                  semi-supervised and unsupervised modes absorb every training sample not \
                  drawn as labeled, the supervised modes use none. With --csv the test \
                  subset comes from what the pool leaves over, so modes that need both a \
                  pool and a test set want IDX data (dedicated test files) or \
                  --test-count 0."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Supervised classification of the test subset (RLF nearest-cluster).
    Nsl(CommonArgs),
    /// Semi-supervised training on the unlabeled pool, then test scoring.
    Nssl(CommonArgs),
    /// Fully unsupervised clustering of the pool, scored by Hungarian
    /// alignment against the withheld labels.
    Unsup(CommonArgs),
    /// One of the reference methods under the same split protocol.
    Baseline {
        /// Which reference method to run.
        #[arg(value_enum)]
        method: MethodArg,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Supervised accuracy across a grid of rescaling factors β.
    SweepBeta(CommonArgs),
    /// Supervised accuracy across a grid of labeled-set sizes N.
    SweepN(CommonArgs),
    /// Semi-supervised run whose primary artifact is the per-sub-step
    /// trace table (confidence and accuracy learning curves).
    TraceEpochs(CommonArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    /// k-nearest neighbours (Euclidean).
    Knn,
    /// Bernoulli naive Bayes on binarized features.
    Nb,
    /// Lloyd k-means on the unlabeled pool.
    Kmeans,
    /// Normalized-cut spectral clustering on a seeded subsample.
    Spectral,
}

impl From<MethodArg> for BaselineMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Knn => BaselineMethod::Knn,
            MethodArg::Nb => BaselineMethod::NaiveBayes,
            MethodArg::Kmeans => BaselineMethod::Kmeans,
            MethodArg::Spectral => BaselineMethod::Spectral,
        }
    }
}

/// Flags shared by every subcommand. Defaults that depend on the mode
/// (labels-per-class, repeats, max-epochs) are resolved in
/// [`build_config`]; their documented values appear there.
#[derive(Args)]
struct CommonArgs {
    /// MNIST-style IDX training images (requires the other three IDX paths).
    #[arg(long, value_name = "PATH", conflicts_with = "csv")]
    train_images: Option<PathBuf>,

    /// IDX training labels.
    #[arg(long, value_name = "PATH", conflicts_with = "csv")]
    train_labels: Option<PathBuf>,

    /// IDX test images.
    #[arg(long, value_name = "PATH", conflicts_with = "csv")]
    test_images: Option<PathBuf>,

    /// IDX test labels.
    #[arg(long, value_name = "PATH", conflicts_with = "csv")]
    test_labels: Option<PathBuf>,

    /// Single labeled CSV (features then label column); labeled, pool and
    /// test partitions are all drawn from it.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Labeled samples per class (N). Repeat the flag under sweep-n to
    /// form the grid. [default: 10; 0 in the unsupervised modes; sweep-n
    /// grid 6 10 20 50 100 240]
    #[arg(long, value_name = "N")]
    labels_per_class: Vec<usize>,

    /// Rescaling factor β. Repeat the flag under sweep-beta to form the
    /// grid. [default: 1.3; sweep-beta grid 1.0 … 2.0 by 0.1, then 3 5 10]
    #[arg(long, value_name = "BETA")]
    beta: Vec<f64>,

    /// Guard added inside each logarithm factor of the kernel.
    #[arg(long, value_name = "EPS", default_value_t = KernelConfig::DEFAULT_EPSILON)]
    epsilon: f64,

    /// Gaussian bandwidth for spectral clustering. [default: median
    /// pairwise distance of the subsample]
    #[arg(long, value_name = "SIGMA")]
    sigma: Option<f64>,

    /// Neighbour count for `baseline knn`; cluster count for `baseline
    /// kmeans`/`baseline spectral`. [default: 1 neighbour; one cluster
    /// per class]
    #[arg(long, value_name = "K")]
    k: Option<usize>,

    /// Unsupervised seeding threshold μ on the logarithmic fidelity:
    /// a candidate seed must satisfy F < μ against every accepted seed.
    #[arg(long, value_name = "MU", allow_hyphen_values = true, default_value_t = -1.0)]
    mu: f64,

    /// Pool samples classified per generic batch.
    #[arg(long, value_name = "COUNT", default_value_t = 500)]
    batch_size: usize,

    /// Pseudo-members kept per cluster when pruning after a generic batch.
    #[arg(long, value_name = "COUNT", default_value_t = 500)]
    n_delta: usize,

    /// Samples absorbed in sub-step 1 of each semi-supervised epoch.
    #[arg(long, value_name = "COUNT", default_value_t = 500)]
    add_count: usize,

    /// Lowest-confidence pseudo-members evicted across all clusters in
    /// sub-steps 2 and 3.
    #[arg(long, value_name = "COUNT", default_value_t = 500)]
    evict_count: usize,

    /// Fraction of each cluster's pseudo-members evicted per unsupervised
    /// iteration.
    #[arg(long, value_name = "FRACTION", default_value_t = 0.35)]
    evict_fraction: f64,

    /// Epoch/iteration cap for the semi-supervised and unsupervised
    /// drivers. [default: 12; 30 under unsup]
    #[arg(long, value_name = "COUNT")]
    max_epochs: Option<usize>,

    /// Lloyd iteration budget for `baseline kmeans`.
    #[arg(long, value_name = "COUNT", default_value_t = 270)]
    iterations: usize,

    /// Pool subsample entering the spectral eigendecomposition.
    #[arg(long, value_name = "COUNT", default_value_t = 2000)]
    subsample: usize,

    /// Independent seeded runs; run r uses seed + r. [default: 20 in the
    /// sweep modes; 1 otherwise]
    #[arg(long, value_name = "COUNT")]
    repeats: Option<usize>,

    /// Base RNG seed for partition draws and every seeded algorithm.
    #[arg(long, value_name = "SEED", default_value_t = 42)]
    seed: u64,

    /// Test subset size: a number, or `all` for the full test set.
    #[arg(long, value_name = "COUNT|all", default_value = "2000", value_parser = parse_count)]
    test_count: CountSpec,

    /// Directory receiving results.json and the CSV tables.
    #[arg(long, value_name = "DIR", default_value = "results")]
    out_dir: PathBuf,

    /// Also write effective_vectors.csv (test-sample cluster similarities
    /// from the first run) for external visualization.
    #[arg(long)]
    emit_effective_vectors: bool,
}

fn parse_count(text: &str) -> Result<CountSpec, String> {
    text.parse()
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Nsl(args) => (Mode::Nsl, args),
        Command::Nssl(args) => (Mode::Nssl, args),
        Command::Unsup(args) => (Mode::Unsup, args),
        Command::Baseline { method, args } => (Mode::Baseline(method.into()), args),
        Command::SweepBeta(args) => (Mode::SweepBeta, args),
        Command::SweepN(args) => (Mode::SweepN, args),
        Command::TraceEpochs(args) => (Mode::TraceEpochs, args),
    };

    match execute(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Maps the crate's error groups onto the documented exit codes.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Numeric(_) => 4,
        Error::FeatureRange { .. }
        | Error::Dimension { .. }
        | Error::ClassCoverage { .. }
        | Error::EmptyCluster { .. }
        | Error::IdxFormat { .. }
        | Error::CsvFormat { .. }
        | Error::Io { .. } => 3,
    }
}

fn execute(mode: Mode, args: CommonArgs) -> rlf::Result<()> {
    let cfg = build_config(mode, &args)?;
    let result = harness::run(&cfg)?;

    let n_runs = if result.sweep.is_empty() {
        result.records.len()
    } else {
        result.sweep.len()
    };
    println!(
        "mean accuracy {:.4} (std {:.4}) over {} seeded run{}; artifacts in {}",
        result.mean_accuracy,
        result.std_accuracy,
        n_runs,
        if n_runs == 1 { "" } else { "s" },
        cfg.out_dir.display()
    );
    Ok(())
}

/// True for the modes that cluster the pool without any labeled samples.
fn is_unsupervised(mode: Mode) -> bool {
    matches!(
        mode,
        Mode::Unsup | Mode::Baseline(BaselineMethod::Kmeans | BaselineMethod::Spectral)
    )
}

/// True for the modes that consume the unlabeled pool. These absorb every
/// training sample not drawn as labeled; the purely supervised modes leave
/// the pool empty (which also keeps CSV leftovers available for the test
/// draw — partitions come out of one file in labeled → pool → test order).
fn needs_pool(mode: Mode) -> bool {
    is_unsupervised(mode) || matches!(mode, Mode::Nssl | Mode::TraceEpochs)
}

/// Resolves the flag set into a full experiment configuration, applying
/// the mode-dependent defaults.
fn build_config(mode: Mode, args: &CommonArgs) -> rlf::Result<ExperimentConfig> {
    let data = data_source(args)?;

    // --labels-per-class: grid-valued only under sweep-n.
    if args.labels_per_class.len() > 1 && mode != Mode::SweepN {
        return Err(Error::Config(
            "--labels-per-class may be repeated only under sweep-n".into(),
        ));
    }
    let n_grid = if mode == Mode::SweepN && args.labels_per_class.is_empty() {
        default_n_grid()
    } else {
        args.labels_per_class.clone()
    };
    let labels_per_class = match mode {
        Mode::SweepN => n_grid.first().copied().unwrap_or(0),
        _ if is_unsupervised(mode) => match args.labels_per_class.first() {
            // Pass a nonzero request through so validation names the
            // conflict instead of silently dropping the labels.
            Some(&n) => n,
            None => 0,
        },
        _ => args.labels_per_class.first().copied().unwrap_or(10),
    };

    // --beta: grid-valued only under sweep-beta.
    if args.beta.len() > 1 && mode != Mode::SweepBeta {
        return Err(Error::Config(
            "--beta may be repeated only under sweep-beta".into(),
        ));
    }
    let beta_grid = if mode == Mode::SweepBeta && args.beta.is_empty() {
        default_beta_grid()
    } else {
        args.beta.clone()
    };
    let beta = beta_grid.first().copied().unwrap_or(KernelConfig::DEFAULT_BETA);
    let kernel = KernelConfig::new(
        beta,
        args.epsilon,
        args.sigma.unwrap_or(KernelConfig::DEFAULT_SIGMA),
    )?;

    let max_epochs = args.max_epochs.unwrap_or(match mode {
        Mode::Unsup => 30,
        _ => 12,
    });
    let repeats = args.repeats.unwrap_or(match mode {
        Mode::SweepBeta | Mode::SweepN => 20,
        _ => 1,
    });

    let cfg = ExperimentConfig {
        mode,
        data,
        split: SplitSpec {
            labels_per_class,
            unlabeled_count: if needs_pool(mode) {
                CountSpec::All
            } else {
                CountSpec::Exactly(0)
            },
            test_count: args.test_count,
            rng_seed: args.seed,
        },
        kernel,
        nssl: NsslConfig {
            batch_size: args.batch_size,
            n_delta: args.n_delta,
            evict_fraction: args.evict_fraction,
            mu: args.mu,
            add_count: args.add_count,
            evict_count: args.evict_count,
            max_epochs,
            rng_seed: args.seed,
        },
        knn_k: args.k.unwrap_or(1),
        kmeans_iterations: args.iterations,
        cluster_k: match mode {
            Mode::Baseline(BaselineMethod::Kmeans | BaselineMethod::Spectral) => args.k,
            _ => None,
        },
        spectral_subsample: args.subsample,
        spectral_sigma: args.sigma,
        beta_grid,
        n_grid,
        repeats,
        out_dir: args.out_dir.clone(),
        emit_effective_vectors: args.emit_effective_vectors,
    };
    Ok(cfg)
}

/// Either the full IDX quad or one CSV; anything else is a usage error.
fn data_source(args: &CommonArgs) -> rlf::Result<DataSource> {
    if let Some(csv) = &args.csv {
        return Ok(DataSource::Csv { path: csv.clone() });
    }
    match (
        &args.train_images,
        &args.train_labels,
        &args.test_images,
        &args.test_labels,
    ) {
        (Some(ti), Some(tl), Some(si), Some(sl)) => Ok(DataSource::Idx {
            train_images: ti.clone(),
            train_labels: tl.clone(),
            test_images: si.clone(),
            test_labels: sl.clone(),
        }),
        (None, None, None, None) => Err(Error::Config(
            "no dataset given: pass --csv, or all four of --train-images --train-labels \
             --test-images --test-labels"
                .into(),
        )),
        _ => Err(Error::Config(
            "incomplete IDX dataset: --train-images, --train-labels, --test-images and \
             --test-labels must be given together"
                .into(),
        )),
    }
}
