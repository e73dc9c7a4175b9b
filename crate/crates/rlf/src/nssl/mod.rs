//! Non-parametric semi-supervised and unsupervised learning on top of the
//! rescaled logarithmic fidelity.
//!
//! The semi-supervised algorithm grows the labeled clusters of
//! [`crate::classifier`] by pseudo-labeling unlabeled samples in batches
//! and periodically evicting the pseudo-members it is least confident
//! about, so assignment mistakes made early can be revised once the
//! clusters have matured:
//!
//! * [`pseudo_label_batch`] — classify a pool and absorb the samples with
//!   the highest effective similarity into their predicted clusters;
//! * [`prune_clusters`] — re-score all pseudo-members and return the
//!   low-confidence ones to the caller;
//! * [`run_nssl`] — the three-sub-step epoch schedule (add, then two
//!   evict/re-assign rounds per epoch);
//! * [`seed_clusters_unsupervised`] / [`run_unsupervised`] — bootstrap
//!   clusters from mutually dissimilar seed samples and iterate
//!   evict/re-assign until the assignment reaches a fixed point;
//! * [`align_labels_hungarian`] — match discovered clusters to true
//!   classes for evaluation.
//!
//! Every similarity used here is the rescaled logarithmic fidelity of
//! [`crate::qkernel`]; the epoch drivers precompute one sample-pair
//! matrix per run and reuse it for all epochs, which keeps results
//! bit-identical to the one-sample-at-a-time operations while making
//! repeated scoring cheap.

mod hungarian;

pub use hungarian::align_labels_hungarian;

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    classify, ev_from_rlf_row, nsl_fit, nsl_predict_batch, ClusterSet, EffectiveVector,
    PseudoMember,
};
use crate::classifier::Cluster;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::pairwise::{into_rlf, log_fid_matrix, log_fid_matrix_shared, rlf_matrix};
use crate::qkernel::{KernelConfig, Sample, SampleId};

/// Knobs of the semi-supervised and unsupervised drivers.
///
/// `add_count`/`evict_count` drive the epoch schedule of [`run_nssl`];
/// `evict_fraction`, `mu` and `max_epochs` drive [`run_unsupervised`];
/// `batch_size` and `n_delta` are the generic batching parameters for
/// callers composing [`pseudo_label_batch`] with [`prune_clusters`]
/// directly. All randomness derives from `rng_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsslConfig {
    /// Pool samples classified per generic batch (≥ 1).
    pub batch_size: usize,
    /// Pseudo-members kept per cluster when pruning after a generic batch.
    pub n_delta: usize,
    /// Fraction of each cluster's pseudo-members evicted per unsupervised
    /// iteration (in [0, 1)).
    pub evict_fraction: f64,
    /// Seeding dissimilarity threshold on the logarithmic fidelity F:
    /// candidate seeds must satisfy F < mu against every existing seed.
    pub mu: f64,
    /// Samples absorbed in sub-step 1 of each semi-supervised epoch (≥ 1).
    pub add_count: usize,
    /// Pseudo-members evicted across all clusters in sub-steps 2 and 3
    /// (≥ 1): the globally lowest-η members leave, wherever they sit.
    pub evict_count: usize,
    /// Upper bound on epochs / unsupervised iterations (≥ 1).
    pub max_epochs: usize,
    /// Seed for every random choice made by the drivers.
    pub rng_seed: u64,
}

impl NsslConfig {
    /// Checks the field invariants, returning a configuration error
    /// naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.add_count == 0 {
            return Err(Error::Config("add_count must be at least 1".into()));
        }
        if self.evict_count == 0 {
            return Err(Error::Config("evict_count must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.evict_fraction) {
            return Err(Error::Config(format!(
                "evict_fraction must lie in [0, 1), got {}",
                self.evict_fraction
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::Config(format!("mu must be finite, got {}", self.mu)));
        }
        Ok(())
    }
}

impl Default for NsslConfig {
    fn default() -> Self {
        NsslConfig {
            batch_size: 500,
            n_delta: 500,
            evict_fraction: 0.35,
            mu: -1.0,
            add_count: 500,
            evict_count: 500,
            max_epochs: 12,
            rng_seed: 42,
        }
    }
}

/// State of one sub-step of an epoch driver, as needed for learning
/// curves: mean pseudo-member confidence η, pseudo-label accuracy γ_c
/// against hidden ground truth, and held-out test accuracy γ.
///
/// η and γ_c are vacuously 1 while no pseudo-members exist (the epoch-0
/// row), as is γ when no test samples were supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochTrace {
    pub epoch: usize,
    /// Sub-step within the epoch (1–3); the state before epoch 1 is
    /// recorded as epoch 0, sub-step 3, so consecutive trace rows always
    /// compare a sub-step to the one preceding it.
    pub substep: usize,
    pub mean_confidence: f64,
    pub cluster_accuracy: f64,
    pub test_accuracy: f64,
}

/// Evaluation inputs for trace emission: labeled held-out samples and the
/// hidden true labels of the unlabeled pool (keyed by sample id). Where
/// a pool sample has no ground-truth entry it simply does not contribute
/// to γ_c. Passing `None` to a driver skips trace emission entirely.
#[derive(Debug, Clone, Copy)]
pub struct EvalData<'a> {
    pub test: &'a [Sample],
    pub ground_truth: &'a BTreeMap<SampleId, usize>,
}

/// Confidence of an effective vector toward one fixed class: η_p = ỹ_p /
/// Σ_{p'} ỹ_{p'}. `classify` reports the same quantity for the argmax
/// class.
fn eta_of(ev: &EffectiveVector, class_index: usize) -> f64 {
    let total: f64 = ev.values().iter().sum();
    ev.values()[class_index] / total
}

/// Ranks predictions by their best effective-vector entry, descending;
/// the sort is stable so equal scores keep their input order.
fn rank_by_best_similarity(preds: &[crate::classifier::Prediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        let va = preds[a].effective.values()[preds[a].class_index];
        let vb = preds[b].effective.values()[preds[b].class_index];
        vb.partial_cmp(&va).expect("effective values are finite")
    });
    order
}

/// Classifies every pool sample against the current clusters, absorbs the
/// `count` samples with the highest best-cluster similarity max_p ỹ_p
/// into their predicted clusters (highest first; exact ties keep pool
/// order), and removes them from the pool.
///
/// Returns the performed assignments as (sample id, class, η) in
/// absorption order. `count` larger than the pool is clamped; an empty
/// pool is a no-op. A cluster without members is a state error.
pub fn pseudo_label_batch(
    pool: &mut Vec<Sample>,
    cs: &mut ClusterSet,
    count: usize,
) -> Result<Vec<(SampleId, usize, f64)>> {
    if pool.is_empty() || count == 0 {
        return Ok(Vec::new());
    }
    cs.check_nonempty()?;
    let count = count.min(pool.len());

    let preds = nsl_predict_batch(pool, cs)?;
    let order = rank_by_best_similarity(&preds);

    let mut assignments = Vec::with_capacity(count);
    let mut taken = vec![false; pool.len()];
    for &i in &order[..count] {
        let pred = &preds[i];
        let sample = pool[i].clone();
        assignments.push((sample.id(), pred.class_index, pred.confidence));
        cs.clusters[pred.class_index].pseudo.push(PseudoMember {
            sample,
            confidence: pred.confidence,
        });
        taken[i] = true;
    }
    let mut idx = 0;
    pool.retain(|_| {
        let keep = !taken[idx];
        idx += 1;
        keep
    });
    Ok(assignments)
}

/// Re-scores every pseudo-member's confidence η against the current
/// clusters, keeps the `keep` highest per cluster (retained members keep
/// their stored order and receive the fresh η), and returns the evicted
/// samples — clusters in ascending order, members in stored order —
/// ready to rejoin an unlabeled pool. Labeled members are never touched.
pub fn prune_clusters(cs: &mut ClusterSet, keep: usize) -> Vec<Sample> {
    let etas = rescore_etas(cs);
    apply_eviction(cs, &etas, |_, n_pseudo| n_pseudo.saturating_sub(keep))
}

/// η of every pseudo-member against the current cluster set, in cluster
/// order: `etas[p][k]` scores cluster p's k-th pseudo-member.
fn rescore_etas(cs: &ClusterSet) -> Vec<Vec<f64>> {
    let (members, ranges) = cs.member_rows();
    let cfg = cs.kernel_config();
    let pseudos: Vec<Sample> = cs
        .clusters()
        .iter()
        .flat_map(|c| c.pseudo_members().iter().map(|pm| pm.sample.clone()))
        .collect();
    if pseudos.is_empty() {
        return vec![Vec::new(); cs.p()];
    }
    let rlf_rows = rlf_matrix(&pseudos, &members, cfg.epsilon(), cfg.beta());
    let mut etas = Vec::with_capacity(cs.p());
    let mut row = 0;
    for cluster in cs.clusters() {
        let scores = (0..cluster.pseudo_members().len())
            .map(|k| {
                let ev = ev_from_rlf_row(rlf_rows.row(row + k), &ranges);
                eta_of(&ev, cluster.class_index())
            })
            .collect();
        row += cluster.pseudo_members().len();
        etas.push(scores);
    }
    etas
}

/// Evicts per-cluster pseudo-members given pre-computed η scores:
/// `evict_n(class, Ñ_p)` names how many of the lowest-η members leave.
/// Retained members keep their relative order and take the fresh η as
/// their stored confidence; evicted samples are returned in cluster
/// order.
fn apply_eviction(
    cs: &mut ClusterSet,
    etas: &[Vec<f64>],
    evict_n: impl Fn(usize, usize) -> usize,
) -> Vec<Sample> {
    let mut evicted = Vec::new();
    for (ci, cluster) in cs.clusters.iter_mut().enumerate() {
        let n = cluster.pseudo.len();
        let evict = evict_n(ci, n).min(n);
        // Order by η descending; the sort is stable, so equal scores keep
        // the earlier member.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            etas[ci][b]
                .partial_cmp(&etas[ci][a])
                .expect("confidences are finite")
        });
        let mut keep_mask = vec![false; n];
        for &k in &order[..n - evict] {
            keep_mask[k] = true;
        }
        let old = std::mem::take(&mut cluster.pseudo);
        for (k, mut pm) in old.into_iter().enumerate() {
            if keep_mask[k] {
                pm.confidence = etas[ci][k];
                cluster.pseudo.push(pm);
            } else {
                evicted.push(pm.sample);
            }
        }
    }
    evicted
}

/// Runs the semi-supervised epoch schedule: see
/// [`run_nssl_with_observer`]. Equivalent to passing an observer that
/// does nothing.
pub fn run_nssl(
    labeled: &[Sample],
    unlabeled: &[Sample],
    p: usize,
    cfg: &KernelConfig,
    ncfg: &NsslConfig,
    eval: Option<EvalData<'_>>,
) -> Result<(ClusterSet, Vec<EpochTrace>)> {
    run_nssl_with_observer(labeled, unlabeled, p, cfg, ncfg, eval, |_, _, _, _| {})
}

/// Semi-supervised learning: fits clusters from the labeled samples, then
/// repeats a three-sub-step epoch until `max_epochs` epochs have run or
/// the pool is empty at the start of an epoch.
///
/// * sub-step 1 absorbs the `add_count` pool samples with the highest
///   best-cluster similarity;
/// * sub-steps 2 and 3 each evict the `evict_count` lowest-η
///   pseudo-members across all clusters back into the pool, then
///   re-absorb that many samples — so the clusters shed their most
///   doubtful members in exchange for whatever the grown clusters now
///   rank highest, while confidently held members stay put.
///
/// The observer sees `(pool, clusters, epoch, substep)` after every
/// sub-step, plus the initial state as epoch 0 / sub-step 3; traces are
/// emitted at the same points when `eval` is provided. Identical inputs
/// produce bit-identical clusters and traces.
pub fn run_nssl_with_observer<F>(
    labeled: &[Sample],
    unlabeled: &[Sample],
    p: usize,
    cfg: &KernelConfig,
    ncfg: &NsslConfig,
    eval: Option<EvalData<'_>>,
    mut observer: F,
) -> Result<(ClusterSet, Vec<EpochTrace>)>
where
    F: FnMut(&[Sample], &ClusterSet, usize, usize),
{
    ncfg.validate()?;
    validate_run_inputs(labeled, unlabeled, eval)?;
    let mut cs = nsl_fit(labeled, p, cfg.clone())?;
    let mut pool: Vec<Sample> = unlabeled.to_vec();
    let mut eng = Engine::new(labeled, unlabeled, eval, cfg, p);
    let mut traces = Vec::new();

    eng.recompute_sums(&cs);
    eng.check_conservation(&pool, &cs);
    observer(&pool, &cs, 0, 3);
    if eval.is_some() {
        traces.push(eng.trace(&cs, 0, 3));
    }

    for epoch in 1..=ncfg.max_epochs {
        if pool.is_empty() {
            break;
        }
        let k = ncfg.add_count.min(pool.len());
        eng.add_top(&mut pool, &mut cs, k);
        eng.recompute_sums(&cs);
        eng.check_conservation(&pool, &cs);
        observer(&pool, &cs, epoch, 1);
        if eval.is_some() {
            traces.push(eng.trace(&cs, epoch, 1));
        }

        for substep in 2..=3 {
            let evicted = eng.evict_global(&mut cs, ncfg.evict_count);
            let count = evicted.len();
            pool.extend(evicted);
            eng.recompute_sums(&cs);
            eng.add_top(&mut pool, &mut cs, count);
            eng.recompute_sums(&cs);
            eng.check_conservation(&pool, &cs);
            observer(&pool, &cs, epoch, substep);
            if eval.is_some() {
                traces.push(eng.trace(&cs, epoch, substep));
            }
        }
    }
    Ok((cs, traces))
}

/// How many relaxation rounds [`seed_clusters_unsupervised`] attempts
/// before abandoning the dissimilarity constraint.
const MAX_RELAX_ROUNDS: usize = 64;

/// One relaxation step of the seeding threshold: raise μ so the
/// constraint F < μ admits more candidates. For the usual negative μ
/// this halves its magnitude (moving toward 0); a positive μ doubles.
fn relax_mu(mu: f64) -> f64 {
    if mu < 0.0 {
        mu / 2.0
    } else if mu > 0.0 {
        mu * 2.0
    } else {
        1.0
    }
}

/// Bootstraps P singleton clusters from an unlabeled pool.
///
/// The first seed is drawn uniformly at random; each subsequent seed is
/// the pool sample maximizing the total logarithmic fidelity to the
/// existing seeds, among candidates whose F to every existing seed stays
/// below `mu` (exact ties take the lowest pool index). If no candidate
/// passes the threshold, μ is relaxed stepwise with a logged warning —
/// after 64 fruitless rounds the argmax runs unfiltered. Each seed
/// becomes its cluster's sole pseudo-member with confidence 1.
pub fn seed_clusters_unsupervised(
    pool: &[Sample],
    p: usize,
    cfg: &KernelConfig,
    mu: f64,
    rng_seed: u64,
) -> Result<ClusterSet> {
    if p == 0 {
        return Err(Error::Config("P must be at least 1".into()));
    }
    if pool.len() < p {
        return Err(Error::Config(format!(
            "pool holds {} samples but P = {p} seeds are required",
            pool.len()
        )));
    }
    if !mu.is_finite() {
        return Err(Error::Config(format!("mu must be finite, got {mu}")));
    }
    check_dims(pool.iter())?;

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let first = rng.gen_range(0..pool.len());
    let mut seeds = vec![first];
    // F of each seed against the whole pool, one row per seed.
    let f_row = |j: usize| -> Vec<f64> {
        log_fid_matrix(std::slice::from_ref(&pool[j]), pool, cfg.epsilon())
            .row(0)
            .to_vec()
    };
    let mut seed_rows = vec![f_row(first)];

    while seeds.len() < p {
        let mut mu_cur = mu;
        let mut rounds = 0;
        let candidates: Vec<usize> = loop {
            let passing: Vec<usize> = (0..pool.len())
                .filter(|j| !seeds.contains(j))
                .filter(|&j| seed_rows.iter().all(|row| row[j] < mu_cur))
                .collect();
            if !passing.is_empty() {
                break passing;
            }
            if rounds >= MAX_RELAX_ROUNDS {
                log::warn!(
                    "cluster seeding: dissimilarity constraint unsatisfiable after {rounds} \
                     relaxations (mu reached {mu_cur}); selecting the unfiltered argmax"
                );
                break (0..pool.len()).filter(|j| !seeds.contains(j)).collect();
            }
            let next = relax_mu(mu_cur);
            log::warn!(
                "cluster seeding: no pool sample has F < {mu_cur} to all {} seeds; \
                 relaxing mu to {next}",
                seeds.len()
            );
            mu_cur = next;
            rounds += 1;
        };

        let mut best = candidates[0];
        let mut best_total = f64::NEG_INFINITY;
        for &j in &candidates {
            let total: f64 = seed_rows.iter().map(|row| row[j]).sum();
            if total > best_total {
                best_total = total;
                best = j;
            }
        }
        seeds.push(best);
        seed_rows.push(f_row(best));
    }

    let clusters = seeds
        .iter()
        .enumerate()
        .map(|(ci, &j)| {
            let mut cluster = Cluster::new(ci, Vec::new());
            cluster.pseudo.push(PseudoMember {
                sample: pool[j].clone(),
                confidence: 1.0,
            });
            cluster
        })
        .collect();
    ClusterSet::new(clusters, cfg.clone())
}

/// Unsupervised clustering: see [`run_unsupervised_with_observer`].
pub fn run_unsupervised(
    pool: &[Sample],
    p: usize,
    cfg: &KernelConfig,
    ncfg: &NsslConfig,
    eval: Option<EvalData<'_>>,
) -> Result<(ClusterSet, Vec<EpochTrace>)> {
    run_unsupervised_with_observer(pool, p, cfg, ncfg, eval, |_, _, _, _| {})
}

/// Unsupervised clustering of an unlabeled pool into P clusters.
///
/// Seeds clusters via [`seed_clusters_unsupervised`], classifies every
/// remaining sample against them, then iterates: evict the
/// `evict_fraction` lowest-η pseudo-members of each cluster (rounded up,
/// but always leaving at least one member) and re-absorb the evictees
/// where they now fit best. Iteration stops when the sample→cluster
/// assignment repeats exactly, or after `max_epochs` rounds.
///
/// The observer runs after the initial classification (epoch 0,
/// sub-step 3) and after each iteration's eviction (sub-step 2) and
/// re-absorption (sub-step 3); traces are emitted at epoch granularity
/// when `eval` is provided. Cluster indices are arbitrary — align them
/// with [`align_labels_hungarian`] before scoring against true labels.
pub fn run_unsupervised_with_observer<F>(
    pool_in: &[Sample],
    p: usize,
    cfg: &KernelConfig,
    ncfg: &NsslConfig,
    eval: Option<EvalData<'_>>,
    mut observer: F,
) -> Result<(ClusterSet, Vec<EpochTrace>)>
where
    F: FnMut(&[Sample], &ClusterSet, usize, usize),
{
    ncfg.validate()?;
    validate_run_inputs(&[], pool_in, eval)?;
    let mut cs = seed_clusters_unsupervised(pool_in, p, cfg, ncfg.mu, ncfg.rng_seed)?;
    let seed_ids: HashSet<SampleId> = assignment_map(&cs).into_keys().collect();
    let mut pool: Vec<Sample> = pool_in
        .iter()
        .filter(|s| !seed_ids.contains(&s.id()))
        .cloned()
        .collect();
    let mut eng = Engine::new(&[], pool_in, eval, cfg, p);
    let mut traces = Vec::new();

    eng.recompute_sums(&cs);
    let k = pool.len();
    eng.add_top(&mut pool, &mut cs, k);
    eng.recompute_sums(&cs);
    eng.check_conservation(&pool, &cs);
    observer(&pool, &cs, 0, 3);
    if eval.is_some() {
        traces.push(eng.trace(&cs, 0, 3));
    }

    let mut prev_assign = assignment_map(&cs);
    for epoch in 1..=ncfg.max_epochs {
        let evicted = eng.evict(&mut cs, |_, n| {
            let want = (ncfg.evict_fraction * n as f64).ceil() as usize;
            want.min(n.saturating_sub(1))
        });
        let count = evicted.len();
        pool.extend(evicted);
        eng.recompute_sums(&cs);
        eng.check_conservation(&pool, &cs);
        observer(&pool, &cs, epoch, 2);
        eng.add_top(&mut pool, &mut cs, count);
        eng.recompute_sums(&cs);
        eng.check_conservation(&pool, &cs);
        observer(&pool, &cs, epoch, 3);
        if eval.is_some() {
            traces.push(eng.trace(&cs, epoch, 3));
        }

        let assign = assignment_map(&cs);
        if assign == prev_assign {
            break;
        }
        prev_assign = assign;
    }
    Ok((cs, traces))
}

/// The current sample→cluster assignment of all pseudo-members.
fn assignment_map(cs: &ClusterSet) -> BTreeMap<SampleId, usize> {
    cs.clusters()
        .iter()
        .flat_map(|c| {
            c.pseudo_members()
                .iter()
                .map(move |pm| (pm.sample.id(), c.class_index()))
        })
        .collect()
}

/// Cluster×class contingency table over pseudo-members: entry `[p][t]`
/// counts cluster p's pseudo-members whose hidden true label is t.
/// Members without a ground-truth entry (or with a label ≥ `p_classes`)
/// are skipped.
pub fn contingency_table(
    cs: &ClusterSet,
    ground_truth: &BTreeMap<SampleId, usize>,
    p_classes: usize,
) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; p_classes]; cs.p()];
    for cluster in cs.clusters() {
        for pm in cluster.pseudo_members() {
            if let Some(&t) = ground_truth.get(&pm.sample.id()) {
                if t < p_classes {
                    table[cluster.class_index()][t] += 1;
                }
            }
        }
    }
    table
}

/// Rejects mixed dimensions up front (kernels are only defined between
/// equal-length samples).
fn check_dims<'a>(samples: impl Iterator<Item = &'a Sample>) -> Result<()> {
    let mut m = None;
    for s in samples {
        match m {
            None => m = Some(s.dim()),
            Some(m) if s.dim() != m => {
                return Err(Error::Dimension {
                    left: m,
                    right: s.dim(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Entry validation shared by the epoch drivers: consistent dimensions,
/// globally unique sample ids (the drivers key cached kernel rows by id),
/// and labels on every test sample.
fn validate_run_inputs(
    labeled: &[Sample],
    pool: &[Sample],
    eval: Option<EvalData<'_>>,
) -> Result<()> {
    let test = eval.map(|e| e.test).unwrap_or(&[]);
    check_dims(labeled.iter().chain(pool).chain(test))?;
    let mut seen = HashSet::new();
    for s in labeled.iter().chain(pool).chain(test) {
        if !seen.insert(s.id()) {
            return Err(Error::Config(format!(
                "sample id {} appears more than once across labeled/pool/test inputs",
                s.id()
            )));
        }
    }
    for s in test {
        if s.label().is_none() {
            return Err(Error::Config(format!(
                "test sample {} carries no label; test accuracy needs labeled samples",
                s.id()
            )));
        }
    }
    Ok(())
}

/// Precomputed kernel state for one driver run.
///
/// One rescaled-logarithmic-fidelity matrix covers every pair the run can
/// need — rows are potential cluster members (labeled samples, then the
/// full pool), columns are everything that gets scored (the full pool,
/// then the test samples). Per-cluster column sums are rebuilt from
/// member rows after each mutation, adding rows in stored member order,
/// which reproduces the one-sample operations bit for bit while touching
/// each matrix row once.
struct Engine<'a> {
    rlf: Mat,
    row_of: HashMap<SampleId, usize>,
    col_of: HashMap<SampleId, usize>,
    n_pool: usize,
    p: usize,
    /// Per-cluster column sums Σ_{m∈cluster} rlf[m][·]; divide by
    /// `counts` for effective-vector entries.
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
    test: &'a [Sample],
    ground_truth: Option<&'a BTreeMap<SampleId, usize>>,
    /// Sorted id multiset of labeled ∪ pool, fixed at construction.
    initial_ids: Vec<SampleId>,
    /// Labeled member ids per cluster at first recompute, for the
    /// immutability check.
    labeled_cores: Option<Vec<Vec<SampleId>>>,
}

impl<'a> Engine<'a> {
    fn new(
        labeled: &[Sample],
        pool: &[Sample],
        eval: Option<EvalData<'a>>,
        cfg: &KernelConfig,
        p: usize,
    ) -> Engine<'a> {
        let test = eval.map(|e| e.test).unwrap_or(&[]);
        let f = log_fid_matrix_shared(labeled, pool, test, cfg.epsilon());
        let rlf = into_rlf(f, cfg.beta());
        let n_cols = pool.len() + test.len();

        let mut row_of = HashMap::with_capacity(labeled.len() + pool.len());
        for (i, s) in labeled.iter().chain(pool).enumerate() {
            row_of.insert(s.id(), i);
        }
        let mut col_of = HashMap::with_capacity(n_cols);
        for (j, s) in pool.iter().chain(test).enumerate() {
            col_of.insert(s.id(), j);
        }
        let mut initial_ids: Vec<SampleId> =
            labeled.iter().chain(pool).map(|s| s.id()).collect();
        initial_ids.sort_unstable();

        Engine {
            rlf,
            row_of,
            col_of,
            n_pool: pool.len(),
            p,
            sums: vec![vec![0.0; n_cols]; p],
            counts: vec![0; p],
            test,
            ground_truth: eval.map(|e| e.ground_truth),
            initial_ids,
            labeled_cores: None,
        }
    }

    /// Rebuilds every cluster's column sums from scratch in member order.
    fn recompute_sums(&mut self, cs: &ClusterSet) {
        if self.labeled_cores.is_none() {
            self.labeled_cores = Some(
                cs.clusters()
                    .iter()
                    .map(|c| c.labeled_members().iter().map(|s| s.id()).collect())
                    .collect(),
            );
        }
        for (ci, cluster) in cs.clusters().iter().enumerate() {
            self.counts[ci] = cluster.member_count();
            let acc = &mut self.sums[ci];
            acc.fill(0.0);
            let member_ids = cluster
                .labeled_members()
                .iter()
                .map(|s| s.id())
                .chain(cluster.pseudo_members().iter().map(|pm| pm.sample.id()));
            for id in member_ids {
                let row = self.rlf.row(self.row_of[&id]);
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
    }

    /// Effective vector of the sample cached in column `col`, from the
    /// current sums.
    fn effective_values(&self, col: usize) -> Vec<f64> {
        (0..self.p)
            .map(|ci| self.sums[ci][col] / self.counts[ci] as f64)
            .collect()
    }

    fn predict_col(&self, col: usize) -> crate::classifier::Prediction {
        classify(EffectiveVector::from_values(self.effective_values(col)))
    }

    /// Absorbs the `count` highest-ranked pool samples; mirrors
    /// [`pseudo_label_batch`] but reads similarities from the cache.
    /// `recompute_sums` must reflect the current clusters.
    fn add_top(&self, pool: &mut Vec<Sample>, cs: &mut ClusterSet, count: usize) {
        if pool.is_empty() || count == 0 {
            return;
        }
        let preds: Vec<crate::classifier::Prediction> = pool
            .iter()
            .map(|s| self.predict_col(self.col_of[&s.id()]))
            .collect();
        let order = rank_by_best_similarity(&preds);
        let mut taken = vec![false; pool.len()];
        for &i in &order[..count.min(pool.len())] {
            let pred = &preds[i];
            cs.clusters[pred.class_index].pseudo.push(PseudoMember {
                sample: pool[i].clone(),
                confidence: pred.confidence,
            });
            taken[i] = true;
        }
        let mut idx = 0;
        pool.retain(|_| {
            let keep = !taken[idx];
            idx += 1;
            keep
        });
    }

    /// Cache-backed counterpart of [`prune_clusters`]'s scoring +
    /// [`apply_eviction`]. `recompute_sums` must reflect the current
    /// clusters.
    fn evict(&self, cs: &mut ClusterSet, evict_n: impl Fn(usize, usize) -> usize) -> Vec<Sample> {
        let etas = self.rescore_etas_cached(cs);
        apply_eviction(cs, &etas, evict_n)
    }

    /// Evicts the `total` lowest-η pseudo-members across all clusters,
    /// ranking every pseudo-member on one global confidence scale. Ties
    /// keep the earlier member in cluster order, and each cluster's
    /// survivors retain their relative order, exactly as in [`evict`].
    /// `recompute_sums` must reflect the current clusters.
    fn evict_global(&self, cs: &mut ClusterSet, total: usize) -> Vec<Sample> {
        let etas = self.rescore_etas_cached(cs);
        let mut flat: Vec<(usize, f64)> = etas
            .iter()
            .enumerate()
            .flat_map(|(ci, scores)| scores.iter().map(move |&e| (ci, e)))
            .collect();
        flat.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("confidences are finite"));
        let mut per_cluster = vec![0usize; etas.len()];
        for &(ci, _) in &flat[..total.min(flat.len())] {
            per_cluster[ci] += 1;
        }
        apply_eviction(cs, &etas, |ci, _| per_cluster[ci])
    }

    /// Cache-backed counterpart of [`rescore_etas`]. `recompute_sums`
    /// must reflect the current clusters.
    fn rescore_etas_cached(&self, cs: &ClusterSet) -> Vec<Vec<f64>> {
        cs.clusters()
            .iter()
            .map(|cluster| {
                cluster
                    .pseudo_members()
                    .iter()
                    .map(|pm| {
                        let values = self.effective_values(self.col_of[&pm.sample.id()]);
                        let ev = EffectiveVector::from_values(values);
                        eta_of(&ev, cluster.class_index())
                    })
                    .collect()
            })
            .collect()
    }

    fn trace(&self, cs: &ClusterSet, epoch: usize, substep: usize) -> EpochTrace {
        let mut eta_sum = 0.0;
        let mut eta_count = 0usize;
        let mut truth_hits = 0usize;
        let mut truth_total = 0usize;
        for cluster in cs.clusters() {
            for pm in cluster.pseudo_members() {
                let values = self.effective_values(self.col_of[&pm.sample.id()]);
                eta_sum += eta_of(&EffectiveVector::from_values(values), cluster.class_index());
                eta_count += 1;
                if let Some(truth) = self.ground_truth {
                    if let Some(&t) = truth.get(&pm.sample.id()) {
                        truth_total += 1;
                        if t == cluster.class_index() {
                            truth_hits += 1;
                        }
                    }
                }
            }
        }
        let mut test_hits = 0usize;
        for (k, s) in self.test.iter().enumerate() {
            let pred = self.predict_col(self.n_pool + k);
            if Some(pred.class_index) == s.label() {
                test_hits += 1;
            }
        }
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        EpochTrace {
            epoch,
            substep,
            mean_confidence: if eta_count == 0 { 1.0 } else { eta_sum / eta_count as f64 },
            cluster_accuracy: ratio(truth_hits, truth_total),
            test_accuracy: ratio(test_hits, self.test.len()),
        }
    }

    /// Asserts that no sample was lost or duplicated and that labeled
    /// cores never change. These are internal-bug detectors, so they
    /// panic rather than return errors.
    fn check_conservation(&self, pool: &[Sample], cs: &ClusterSet) {
        let mut ids: Vec<SampleId> = pool.iter().map(|s| s.id()).collect();
        for cluster in cs.clusters() {
            ids.extend(cluster.labeled_members().iter().map(|s| s.id()));
            ids.extend(cluster.pseudo_members().iter().map(|pm| pm.sample.id()));
        }
        ids.sort_unstable();
        assert_eq!(
            ids, self.initial_ids,
            "sample conservation violated: pool + cluster members no longer \
             form the initial id multiset"
        );
        if let Some(cores) = &self.labeled_cores {
            for (ci, cluster) in cs.clusters().iter().enumerate() {
                let now: Vec<SampleId> =
                    cluster.labeled_members().iter().map(|s| s.id()).collect();
                assert_eq!(now, cores[ci], "labeled core of cluster {ci} changed");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::effective_vector;
    use crate::qkernel::rlf;
    use proptest::prelude::*;
    use rand::Rng;

    fn sample(id: u64, features: Vec<f64>, label: Option<usize>) -> Sample {
        Sample::new(SampleId(id), features, label).unwrap()
    }

    /// Two well-separated uniform blobs in [0,1]², `n` points each; the
    /// first point of each blob is labeled.
    fn two_blobs(n: usize, seed: u64) -> (Vec<Sample>, Vec<Sample>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labeled = Vec::new();
        let mut pool = Vec::new();
        let mut id = 0u64;
        for (class, center) in [(0usize, 0.2f64), (1, 0.8)] {
            for k in 0..n {
                let feats = vec![
                    center + rng.gen_range(-0.05..0.05),
                    center + rng.gen_range(-0.05..0.05),
                ];
                if k == 0 {
                    labeled.push(sample(id, feats, Some(class)));
                } else {
                    pool.push(sample(id, feats, None));
                }
                id += 1;
            }
        }
        (labeled, pool)
    }

    fn cfg() -> KernelConfig {
        KernelConfig::default()
    }

    /// Cluster membership as comparable data: per cluster the labeled
    /// ids and the pseudo (id, confidence-bits) in stored order.
    fn membership(cs: &ClusterSet) -> Vec<(Vec<u64>, Vec<(u64, u64)>)> {
        cs.clusters()
            .iter()
            .map(|c| {
                (
                    c.labeled_members().iter().map(|s| s.id().0).collect(),
                    c.pseudo_members()
                        .iter()
                        .map(|pm| (pm.sample.id().0, pm.confidence.to_bits()))
                        .collect(),
                )
            })
            .collect()
    }

    #[test]
    fn batch_assigns_blobs_correctly_and_matches_scalar_argmax() {
        let (labeled, mut pool) = two_blobs(10, 5);
        let mut cs = nsl_fit(&labeled, 2, cfg()).unwrap();
        let expected: Vec<(u64, usize)> = pool
            .iter()
            .map(|s| {
                // Brute-force argmax over scalar kernel calls.
                let scores: Vec<f64> = labeled
                    .iter()
                    .map(|l| rlf(s, l, cs.kernel_config()).unwrap())
                    .collect();
                let class = if scores[0] >= scores[1] { 0 } else { 1 };
                (s.id().0, class)
            })
            .collect();

        let assignments = pseudo_label_batch(&mut pool, &mut cs, 18).unwrap();
        assert_eq!(assignments.len(), 18);
        assert!(pool.is_empty(), "count = pool size drains the pool");
        for (id, class, eta) in &assignments {
            let want = expected.iter().find(|(i, _)| i == &id.0).unwrap().1;
            assert_eq!(*class, want, "sample {id}");
            // Blob membership: ids below 10 are class 0.
            assert_eq!(*class, usize::from(id.0 >= 10));
            assert!(*eta > 0.5 && *eta <= 1.0);
        }
    }

    #[test]
    fn batch_ranks_exact_copy_of_labeled_member_first() {
        let (labeled, mut pool) = two_blobs(6, 9);
        let copy = sample(100, labeled[0].features().to_vec(), None);
        pool.push(copy);
        let mut cs = nsl_fit(&labeled, 2, cfg()).unwrap();
        let assignments = pseudo_label_batch(&mut pool, &mut cs, 3).unwrap();
        assert_eq!(assignments[0].0, SampleId(100));
        assert_eq!(assignments[0].1, 0);
    }

    #[test]
    fn batch_clamps_count_and_tolerates_empty_pool() {
        let (labeled, mut pool) = two_blobs(3, 1);
        let mut cs = nsl_fit(&labeled, 2, cfg()).unwrap();
        let n = pool.len();
        assert_eq!(pseudo_label_batch(&mut pool, &mut cs, 999).unwrap().len(), n);
        assert!(pseudo_label_batch(&mut pool, &mut cs, 5).unwrap().is_empty());
    }

    #[test]
    fn batch_rejects_empty_cluster() {
        let clusters = vec![Cluster::new(0, vec![sample(0, vec![0.5], Some(0))]), Cluster::new(1, Vec::new())];
        let mut cs = ClusterSet::new(clusters, cfg()).unwrap();
        let mut pool = vec![sample(7, vec![0.3], None)];
        match pseudo_label_batch(&mut pool, &mut cs, 1).unwrap_err() {
            Error::EmptyCluster { class_index } => assert_eq!(class_index, 1),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn prune_keeps_the_highest_confidence_members() {
        // Cluster 0 anchored at 0.1, cluster 1 at 0.9; pseudo-members of
        // cluster 0 at increasing distance from its anchor have strictly
        // decreasing η.
        let labeled = vec![
            sample(0, vec![0.1, 0.1], Some(0)),
            sample(1, vec![0.9, 0.9], Some(1)),
        ];
        let mut cs = nsl_fit(&labeled, 2, cfg()).unwrap();
        for (id, x) in [(10u64, 0.12f64), (11, 0.5), (12, 0.85)] {
            cs.clusters[0].pseudo.push(PseudoMember {
                sample: sample(id, vec![x, x], None),
                confidence: 0.0,
            });
        }
        let before = rescore_etas(&cs);
        let evicted = prune_clusters(&mut cs, 1);
        let evicted_ids: Vec<u64> = evicted.iter().map(|s| s.id().0).collect();
        assert_eq!(evicted_ids, vec![11, 12]);
        let kept = &cs.clusters()[0].pseudo_members();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].sample.id().0, 10);
        // The retained member carries its freshly scored confidence.
        assert_eq!(kept[0].confidence.to_bits(), before[0][0].to_bits());
    }

    #[test]
    fn prune_extremes_are_noops_or_full_evictions() {
        let (labeled, mut pool) = two_blobs(5, 3);
        let mut cs = nsl_fit(&labeled, 2, cfg()).unwrap();
        pseudo_label_batch(&mut pool, &mut cs, 8).unwrap();
        let mut keep_all = cs.clone();
        assert!(prune_clusters(&mut keep_all, 100).is_empty());
        assert_eq!(prune_clusters(&mut cs, 0).len(), 8);
        assert!(cs.clusters().iter().all(|c| c.pseudo_members().is_empty()));
        assert!(cs.clusters().iter().all(|c| !c.labeled_members().is_empty()));
    }

    #[test]
    fn eviction_respects_the_confidence_order_statistic() {
        let (labeled, mut pool) = two_blobs(8, 17);
        let mut cs = nsl_fit(&labeled, 2, cfg()).unwrap();
        pseudo_label_batch(&mut pool, &mut cs, 14).unwrap();
        let etas = rescore_etas(&cs);
        let mut cs2 = cs.clone();
        let evicted = prune_clusters(&mut cs2, 3);
        for (ci, cluster) in cs.clusters().iter().enumerate() {
            let evicted_scores: Vec<f64> = cluster
                .pseudo_members()
                .iter()
                .enumerate()
                .filter(|(_, pm)| evicted.iter().any(|s| s.id() == pm.sample.id()))
                .map(|(k, _)| etas[ci][k])
                .collect();
            let kept_scores: Vec<f64> = cs2.clusters()[ci]
                .pseudo_members()
                .iter()
                .map(|pm| pm.confidence)
                .collect();
            if let (Some(max_evicted), Some(min_kept)) = (
                evicted_scores.iter().cloned().reduce(f64::max),
                kept_scores.iter().cloned().reduce(f64::min),
            ) {
                assert!(min_kept >= max_evicted, "cluster {ci}");
            }
        }
    }

    #[test]
    fn empty_pool_reduces_nssl_to_nsl() {
        let (labeled, _) = two_blobs(4, 2);
        let test: Vec<Sample> = vec![
            sample(200, vec![0.22, 0.18], Some(0)),
            sample(201, vec![0.81, 0.77], Some(1)),
        ];
        let truth = BTreeMap::new();
        let eval = EvalData {
            test: &test,
            ground_truth: &truth,
        };
        let ncfg = NsslConfig::default();
        let (cs, traces) = run_nssl(&labeled, &[], 2, &cfg(), &ncfg, Some(eval)).unwrap();

        let reference = nsl_fit(&labeled, 2, cfg()).unwrap();
        assert_eq!(membership(&cs), membership(&reference));
        assert_eq!(traces.len(), 1);
        assert_eq!((traces[0].epoch, traces[0].substep), (0, 3));
        assert_eq!(traces[0].mean_confidence, 1.0);
        assert_eq!(traces[0].cluster_accuracy, 1.0);

        let preds = nsl_predict_batch(&test, &reference).unwrap();
        let acc = preds
            .iter()
            .zip(&test)
            .filter(|(p, s)| Some(p.class_index) == s.label())
            .count() as f64
            / test.len() as f64;
        assert_eq!(traces[0].test_accuracy, acc);
    }

    #[test]
    fn epoch_driver_matches_manual_operation_sequence() {
        let (labeled, pool0) = two_blobs(12, 13);
        let ncfg = NsslConfig {
            add_count: 8,
            evict_count: 100, // ≥ total pseudo-members, so eviction == prune to zero
            max_epochs: 2,
            ..NsslConfig::default()
        };
        let (cs_driver, _) = run_nssl(&labeled, &pool0, 2, &cfg(), &ncfg, None).unwrap();

        let mut cs = nsl_fit(&labeled, 2, cfg()).unwrap();
        let mut pool = pool0.clone();
        for _ in 0..2 {
            if pool.is_empty() {
                break;
            }
            let k = ncfg.add_count.min(pool.len());
            pseudo_label_batch(&mut pool, &mut cs, k).unwrap();
            for _ in 0..2 {
                let evicted = prune_clusters(&mut cs, 0);
                let count = evicted.len();
                pool.extend(evicted);
                pseudo_label_batch(&mut pool, &mut cs, count).unwrap();
            }
        }
        assert_eq!(membership(&cs_driver), membership(&cs));
    }

    #[test]
    fn epoch_eviction_is_global_across_clusters() {
        // Two confident matches per labeled core plus two ambiguous
        // mid-plane samples that classify into cluster 0. Evicting 2 must
        // remove the two lowest-η pseudo-members on one combined ranking
        // — both from cluster 0 — and leave the confident cluster alone,
        // rather than taking 2 from each cluster.
        let labeled = vec![
            sample(0, vec![0.2, 0.2], Some(0)),
            sample(1, vec![0.8, 0.8], Some(1)),
        ];
        let pool0 = vec![
            sample(10, vec![0.21, 0.20], None),
            sample(11, vec![0.20, 0.19], None),
            sample(12, vec![0.79, 0.80], None),
            sample(13, vec![0.80, 0.81], None),
            sample(14, vec![0.48, 0.47], None),
            sample(15, vec![0.47, 0.48], None),
        ];
        let kcfg = cfg();
        let mut cs = nsl_fit(&labeled, 2, kcfg.clone()).unwrap();
        let mut pool = pool0.clone();
        let mut eng = Engine::new(&labeled, &pool0, None, &kcfg, 2);
        eng.recompute_sums(&cs);
        eng.add_top(&mut pool, &mut cs, 6);
        eng.recompute_sums(&cs);

        let mut ranked: Vec<(f64, u64)> = eng
            .rescore_etas_cached(&cs)
            .iter()
            .zip(cs.clusters())
            .flat_map(|(scores, c)| {
                scores
                    .iter()
                    .zip(c.pseudo_members())
                    .map(|(&eta, pm)| (eta, pm.sample.id().0))
            })
            .collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let want: HashSet<u64> = ranked[..2].iter().map(|&(_, id)| id).collect();

        let evicted = eng.evict_global(&mut cs, 2);
        let got: HashSet<u64> = evicted.iter().map(|s| s.id().0).collect();
        assert_eq!(evicted.len(), 2, "total evicted, not per cluster");
        assert_eq!(got, want);
        assert_eq!(got, HashSet::from([14, 15]));
        assert_eq!(cs.clusters()[0].pseudo_members().len(), 2);
        assert_eq!(cs.clusters()[1].pseudo_members().len(), 2);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let (labeled, pool) = two_blobs(10, 23);
        let truth: BTreeMap<SampleId, usize> =
            pool.iter().map(|s| (s.id(), usize::from(s.id().0 >= 10))).collect();
        let test: Vec<Sample> = vec![
            sample(300, vec![0.2, 0.2], Some(0)),
            sample(301, vec![0.8, 0.8], Some(1)),
        ];
        let eval = EvalData {
            test: &test,
            ground_truth: &truth,
        };
        let ncfg = NsslConfig {
            add_count: 5,
            evict_count: 3,
            max_epochs: 3,
            ..NsslConfig::default()
        };
        let (cs_a, tr_a) = run_nssl(&labeled, &pool, 2, &cfg(), &ncfg, Some(eval)).unwrap();
        let (cs_b, tr_b) = run_nssl(&labeled, &pool, 2, &cfg(), &ncfg, Some(eval)).unwrap();
        assert_eq!(membership(&cs_a), membership(&cs_b));
        assert_eq!(tr_a, tr_b);
        for t in &tr_a {
            for rate in [t.mean_confidence, t.cluster_accuracy, t.test_accuracy] {
                assert!((0.0..=1.0).contains(&rate), "trace {t:?}");
            }
        }
    }

    #[test]
    fn observer_sees_conserved_state_every_substep() {
        let (labeled, pool) = two_blobs(10, 31);
        let mut initial: Vec<u64> = labeled.iter().chain(&pool).map(|s| s.id().0).collect();
        initial.sort_unstable();
        let labeled_ids: Vec<Vec<u64>> = vec![vec![0], vec![10]];
        let ncfg = NsslConfig {
            add_count: 6,
            evict_count: 4,
            max_epochs: 3,
            ..NsslConfig::default()
        };
        let mut calls = 0usize;
        run_nssl_with_observer(&labeled, &pool, 2, &cfg(), &ncfg, None, |pool, cs, _, _| {
            calls += 1;
            let mut ids: Vec<u64> = pool.iter().map(|s| s.id().0).collect();
            for c in cs.clusters() {
                ids.extend(c.labeled_members().iter().map(|s| s.id().0));
                ids.extend(c.pseudo_members().iter().map(|pm| pm.sample.id().0));
            }
            ids.sort_unstable();
            assert_eq!(ids, initial);
            for (ci, c) in cs.clusters().iter().enumerate() {
                let now: Vec<u64> = c.labeled_members().iter().map(|s| s.id().0).collect();
                assert_eq!(now, labeled_ids[ci]);
            }
        })
        .unwrap();
        // Epoch 0 plus three sub-steps per epoch.
        assert_eq!(calls, 1 + 3 * 3);
    }

    #[test]
    fn seeding_picks_mutually_dissimilar_far_points() {
        // Three far-apart anchor points plus near-duplicates of the first
        // anchor; whatever the random first seed is, the remaining seeds
        // must be the other two anchors (duplicates fail the F < mu
        // test against the first anchor or its duplicates).
        let anchors = [0.05f64, 0.5, 0.95];
        let mut pool: Vec<Sample> = anchors
            .iter()
            .enumerate()
            .map(|(i, &a)| sample(i as u64, vec![a; 4], None))
            .collect();
        for k in 0..5 {
            pool.push(sample(10 + k, vec![0.05 + 0.001 * (k + 1) as f64; 4], None));
        }
        let cs = seed_clusters_unsupervised(&pool, 3, &cfg(), -0.4, 7).unwrap();
        let seed_ids: Vec<u64> = cs
            .clusters()
            .iter()
            .map(|c| c.pseudo_members()[0].sample.id().0)
            .collect();
        // Exhaustive oracle: recompute the dissimilarity condition by
        // scalar calls.
        for (i, &a) in seed_ids.iter().enumerate() {
            for &b in &seed_ids[i + 1..] {
                let sa = pool.iter().find(|s| s.id().0 == a).unwrap();
                let sb = pool.iter().find(|s| s.id().0 == b).unwrap();
                let f = crate::qkernel::log_fidelity(sa, sb, &cfg()).unwrap();
                assert!(f < -0.4, "seeds {a}/{b} have F = {f}");
            }
        }
        // The three anchors are the only mutually dissimilar triple, so
        // the seed set must be exactly {0, 1, 2} up to duplicate swaps of
        // anchor 0 (ids 10..15 duplicate it).
        let canonical: HashSet<u64> = seed_ids
            .iter()
            .map(|&id| if id >= 10 { 0 } else { id })
            .collect();
        assert_eq!(canonical, HashSet::from([0, 1, 2]));
    }

    #[test]
    fn degenerate_pool_falls_back_after_relaxation() {
        let pool: Vec<Sample> = (0..4).map(|i| sample(i, vec![0.5, 0.5], None)).collect();
        let cs = seed_clusters_unsupervised(&pool, 3, &cfg(), -1.0, 3).unwrap();
        assert_eq!(cs.p(), 3);
        let ids: HashSet<u64> = cs
            .clusters()
            .iter()
            .map(|c| c.pseudo_members()[0].sample.id().0)
            .collect();
        assert_eq!(ids.len(), 3, "seeds are distinct pool samples");
    }

    #[test]
    fn seeding_edge_cases() {
        let pool = vec![sample(0, vec![0.1], None), sample(1, vec![0.9], None)];
        let cs = seed_clusters_unsupervised(&pool, 1, &cfg(), -1.0, 0).unwrap();
        assert_eq!(cs.p(), 1);
        assert_eq!(cs.clusters()[0].pseudo_members().len(), 1);
        assert!(matches!(
            seed_clusters_unsupervised(&pool, 3, &cfg(), -1.0, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unsupervised_run_converges_on_duplicated_patterns() {
        // Three distinct patterns, three copies each.
        let patterns = [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]];
        let mut pool = Vec::new();
        let mut truth = BTreeMap::new();
        for (c, pat) in patterns.iter().enumerate() {
            for k in 0..3 {
                let id = (c * 3 + k) as u64;
                pool.push(sample(id, pat.to_vec(), None));
                truth.insert(SampleId(id), c);
            }
        }
        let ncfg = NsslConfig {
            max_epochs: 30,
            ..NsslConfig::default()
        };
        let eval = EvalData {
            test: &[],
            ground_truth: &truth,
        };
        let (cs, traces) = run_unsupervised(&pool, 3, &cfg(), &ncfg, Some(eval)).unwrap();
        // Convergence well before the cap, with pure clusters.
        assert!(traces.len() < 30);
        for cluster in cs.clusters() {
            let classes: HashSet<usize> = cluster
                .pseudo_members()
                .iter()
                .map(|pm| truth[&pm.sample.id()])
                .collect();
            assert_eq!(classes.len(), 1, "cluster {} is mixed", cluster.class_index());
        }
        // Perfect pseudo-label accuracy after Hungarian alignment.
        let table = contingency_table(&cs, &truth, 3);
        let perm = align_labels_hungarian(&table).unwrap();
        let matched: usize = (0..3).map(|c| table[c][perm[c]]).sum();
        assert_eq!(matched, 9);
        assert!(traces.last().unwrap().mean_confidence > 0.0);
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let mut ncfg = NsslConfig::default();
        ncfg.evict_fraction = 1.0;
        assert!(matches!(ncfg.validate(), Err(Error::Config(_))));
        ncfg = NsslConfig { max_epochs: 0, ..NsslConfig::default() };
        assert!(matches!(ncfg.validate(), Err(Error::Config(_))));
        assert!(NsslConfig::default().validate().is_ok());
    }

    #[test]
    fn duplicate_ids_across_inputs_are_rejected() {
        let labeled = vec![sample(0, vec![0.2], Some(0)), sample(1, vec![0.8], Some(1))];
        let pool = vec![sample(0, vec![0.4], None)];
        match run_nssl(&labeled, &pool, 2, &cfg(), &NsslConfig::default(), None).unwrap_err() {
            Error::Config(msg) => assert!(msg.contains("more than once"), "msg: {msg}"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn scalar_effective_vector_agrees_with_engine_scoring() {
        // The cached engine path and the public one-sample path must be
        // bit-identical when they score the same state: the final trace
        // row describes the final cluster set, so recomputing its
        // statistics with scalar kernel calls must reproduce it exactly.
        let (labeled, pool) = two_blobs(6, 41);
        let truth: BTreeMap<SampleId, usize> = pool
            .iter()
            .map(|s| (s.id(), usize::from(s.id().0 >= 6)))
            .collect();
        let test = vec![
            sample(300, vec![0.21, 0.19], Some(0)),
            sample(301, vec![0.55, 0.45], Some(1)),
            sample(302, vec![0.79, 0.83], Some(1)),
        ];
        let eval = EvalData {
            test: &test,
            ground_truth: &truth,
        };
        let ncfg = NsslConfig {
            add_count: 4,
            evict_count: 2,
            max_epochs: 2,
            ..NsslConfig::default()
        };
        let (cs, traces) = run_nssl(&labeled, &pool, 2, &cfg(), &ncfg, Some(eval)).unwrap();
        let last = traces.last().unwrap();

        let mut eta_sum = 0.0;
        let mut count = 0usize;
        for cluster in cs.clusters() {
            for pm in cluster.pseudo_members() {
                let ev = effective_vector(&pm.sample, &cs).unwrap();
                eta_sum += eta_of(&ev, cluster.class_index());
                count += 1;
            }
        }
        assert!(count > 0);
        let mean = eta_sum / count as f64;
        assert_eq!(last.mean_confidence.to_bits(), mean.to_bits());

        let preds = nsl_predict_batch(&test, &cs).unwrap();
        let hits = preds
            .iter()
            .zip(&test)
            .filter(|(p, s)| Some(p.class_index) == s.label())
            .count();
        assert_eq!(last.test_accuracy, hits as f64 / test.len() as f64);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Conservation, labeled-core immutability, and reproducibility
        /// over randomized toy problems.
        #[test]
        fn prop_driver_invariants(
            seed in 0u64..1000,
            n_per_class in 2usize..6,
            add in 1usize..6,
            evict in 1usize..4,
            epochs in 1usize..4,
        ) {
            let (labeled, pool) = two_blobs(n_per_class, seed);
            let ncfg = NsslConfig {
                add_count: add,
                evict_count: evict,
                max_epochs: epochs,
                ..NsslConfig::default()
            };
            let mut initial: Vec<u64> = labeled.iter().chain(&pool).map(|s| s.id().0).collect();
            initial.sort_unstable();
            let run = |probe: bool| {
                run_nssl_with_observer(&labeled, &pool, 2, &cfg(), &ncfg, None, |pool, cs, _, _| {
                    if !probe {
                        return;
                    }
                    let mut ids: Vec<u64> = pool.iter().map(|s| s.id().0).collect();
                    for c in cs.clusters() {
                        ids.extend(c.labeled_members().iter().map(|s| s.id().0));
                        ids.extend(c.pseudo_members().iter().map(|pm| pm.sample.id().0));
                    }
                    ids.sort_unstable();
                    assert_eq!(ids, initial);
                })
                .unwrap()
            };
            let (cs_a, _) = run(true);
            let (cs_b, _) = run(false);
            prop_assert_eq!(membership(&cs_a), membership(&cs_b));
        }
    }
}
