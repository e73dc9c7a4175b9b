//! Cluster-based non-parametric classification (the supervised method).
//!
//! Labeled samples of each class form a *cluster*. A query sample y is
//! represented by its *effective vector* ỹ — the per-cluster average RLF
//! between y and every cluster member — and classified by the argmax of ỹ,
//! with a confidence score given by normalizing ỹ to unit sum. Because
//! there are no trainable parameters, "fitting" is just organizing the
//! labeled samples into clusters.
//!
//! Reduction order is pinned: each ỹ_p is a single sequential sum over
//! cluster members (labeled members first, then pseudo-labeled members, in
//! stored order). The batch path reuses this exact order over cached
//! kernel rows, so batched and scalar evaluation are bit-identical.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pairwise;
use crate::qkernel::{rlf, KernelConfig, Sample};

/// A sample carrying an algorithm-assigned (pseudo) label, together with
/// the confidence it was last scored with.
#[derive(Debug, Clone)]
pub struct PseudoMember {
    pub sample: Sample,
    pub confidence: f64,
}

/// The members assigned to one class: a labeled core that never changes
/// plus pseudo-labeled members that come and go during semi-supervised
/// refinement.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub(crate) class_index: usize,
    pub(crate) labeled: Vec<Sample>,
    pub(crate) pseudo: Vec<PseudoMember>,
}

impl Cluster {
    /// A cluster over labeled members only.
    pub fn new(class_index: usize, labeled: Vec<Sample>) -> Self {
        Cluster {
            class_index,
            labeled,
            pseudo: Vec::new(),
        }
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn labeled_members(&self) -> &[Sample] {
        &self.labeled
    }

    pub fn pseudo_members(&self) -> &[PseudoMember] {
        &self.pseudo
    }

    /// Total member count N_p + Ñ_p.
    pub fn member_count(&self) -> usize {
        self.labeled.len() + self.pseudo.len()
    }
}

/// One cluster per class, indices 0..P−1 in order, plus the kernel
/// configuration all similarity evaluations use.
#[derive(Debug, Clone)]
pub struct ClusterSet {
    pub(crate) clusters: Vec<Cluster>,
    kernel_cfg: KernelConfig,
}

impl ClusterSet {
    /// Validates that cluster i carries class index i.
    pub fn new(clusters: Vec<Cluster>, kernel_cfg: KernelConfig) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::Config("a cluster set needs at least one cluster".into()));
        }
        for (i, cluster) in clusters.iter().enumerate() {
            if cluster.class_index != i {
                return Err(Error::Config(format!(
                    "cluster at position {i} carries class index {}; clusters must be ordered by class",
                    cluster.class_index
                )));
            }
        }
        Ok(ClusterSet {
            clusters,
            kernel_cfg,
        })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Number of classes P.
    pub fn p(&self) -> usize {
        self.clusters.len()
    }

    pub fn kernel_config(&self) -> &KernelConfig {
        &self.kernel_cfg
    }

    /// Ensures every cluster can participate in classification.
    pub(crate) fn check_nonempty(&self) -> Result<()> {
        for cluster in &self.clusters {
            if cluster.member_count() == 0 {
                return Err(Error::EmptyCluster {
                    class_index: cluster.class_index,
                });
            }
        }
        Ok(())
    }

    /// All members in the pinned reduction order (cluster 0's labeled then
    /// pseudo members, then cluster 1's, ...), plus per-cluster ranges.
    pub(crate) fn member_rows(&self) -> (Vec<Sample>, Vec<std::ops::Range<usize>>) {
        let mut members = Vec::new();
        let mut ranges = Vec::with_capacity(self.clusters.len());
        for cluster in &self.clusters {
            let start = members.len();
            members.extend(cluster.labeled.iter().cloned());
            members.extend(cluster.pseudo.iter().map(|m| m.sample.clone()));
            ranges.push(start..members.len());
        }
        (members, ranges)
    }
}

/// The P-dimensional representation ỹ of a sample: its average RLF against
/// each cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveVector {
    values: Vec<f64>,
}

impl EffectiveVector {
    pub(crate) fn from_values(values: Vec<f64>) -> Self {
        EffectiveVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Classification outcome: the winning class, its normalized confidence,
/// and the full effective vector it was derived from.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub class_index: usize,
    pub confidence: f64,
    pub effective: EffectiveVector,
}

/// Computes ỹ_p = (1/(N_p+Ñ_p)) Σ_{x ∈ cluster p} rlf(x, y) for every p.
///
/// The sum runs over labeled *and* pseudo members, sequentially in member
/// order.
pub fn effective_vector(y: &Sample, cs: &ClusterSet) -> Result<EffectiveVector> {
    cs.check_nonempty()?;
    let mut values = Vec::with_capacity(cs.p());
    for cluster in &cs.clusters {
        let mut sum = 0.0f64;
        for member in &cluster.labeled {
            sum += rlf(member, y, &cs.kernel_cfg)?;
        }
        for member in &cluster.pseudo {
            sum += rlf(&member.sample, y, &cs.kernel_cfg)?;
        }
        values.push(sum / cluster.member_count() as f64);
    }
    Ok(EffectiveVector::from_values(values))
}

/// Argmax classification of an effective vector; exact ties resolve to the
/// lowest class index (relevant only for degenerate kernels such as β = 1).
pub fn classify(ev: EffectiveVector) -> Prediction {
    debug_assert!(!ev.is_empty());
    let mut best = 0usize;
    for (i, &v) in ev.values.iter().enumerate() {
        if v > ev.values[best] {
            best = i;
        }
    }
    let total: f64 = ev.values.iter().sum();
    Prediction {
        class_index: best,
        confidence: ev.values[best] / total,
        effective: ev,
    }
}

/// Organizes labeled samples into P clusters.
///
/// Every sample must carry a label in {0, ..., P−1}, and every class must
/// receive at least one sample.
pub fn nsl_fit(labeled: &[Sample], p: usize, cfg: KernelConfig) -> Result<ClusterSet> {
    if p == 0 {
        return Err(Error::Config("P must be at least 1".into()));
    }
    let mut clusters: Vec<Cluster> = (0..p).map(|i| Cluster::new(i, Vec::new())).collect();
    for sample in labeled {
        match sample.label() {
            Some(label) if label < p => clusters[label].labeled.push(sample.clone()),
            Some(label) => {
                return Err(Error::Config(format!(
                    "sample {} has label {label}, outside 0..{p}",
                    sample.id()
                )))
            }
            None => {
                return Err(Error::Config(format!(
                    "sample {} has no label; nsl_fit requires labeled samples",
                    sample.id()
                )))
            }
        }
    }
    let missing: Vec<usize> = clusters
        .iter()
        .filter(|c| c.labeled.is_empty())
        .map(|c| c.class_index)
        .collect();
    if !missing.is_empty() {
        return Err(Error::ClassCoverage { missing, p });
    }
    ClusterSet::new(clusters, cfg)
}

/// Effective vector assembled from one precomputed RLF row (`row[i]` =
/// rlf between the query and the i-th member in pinned order). Sums are
/// sequential per cluster range — bit-identical to [`effective_vector`].
pub(crate) fn ev_from_rlf_row(
    row: &[f64],
    ranges: &[std::ops::Range<usize>],
) -> EffectiveVector {
    let values = ranges
        .iter()
        .map(|range| {
            let slice = &row[range.clone()];
            let mut sum = 0.0f64;
            for &v in slice {
                sum += v;
            }
            sum / slice.len() as f64
        })
        .collect();
    EffectiveVector::from_values(values)
}

/// Classifies a batch of samples against one cluster set.
///
/// Equivalent to mapping [`effective_vector`] + [`classify`] over the
/// batch (bit-identically so), but evaluates the kernel through the cached
/// batch engine and parallelizes across samples.
pub fn nsl_predict_batch(ys: &[Sample], cs: &ClusterSet) -> Result<Vec<Prediction>> {
    cs.check_nonempty()?;
    if ys.is_empty() {
        return Ok(Vec::new());
    }
    let (members, ranges) = cs.member_rows();
    let dim = members[0].dim();
    for y in ys {
        if y.dim() != dim {
            return Err(Error::Dimension {
                left: dim,
                right: y.dim(),
            });
        }
    }
    let rlf_rows = pairwise::rlf_matrix(ys, &members, cs.kernel_cfg.epsilon(), cs.kernel_cfg.beta());
    let predictions = (0..ys.len())
        .into_par_iter()
        .map(|i| classify(ev_from_rlf_row(rlf_rows.row(i), &ranges)))
        .collect();
    Ok(predictions)
}
