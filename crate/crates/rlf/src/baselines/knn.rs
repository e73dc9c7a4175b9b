//! k-nearest-neighbour classification under a pluggable metric.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::pairwise::{euclidean_matrix, rlf_matrix};
use crate::qkernel::{gaussian_from_distance, KernelConfig, Sample};
use crate::{Error, Result};

/// Pairwise measure used to rank neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Euclidean distance; smaller is closer.
    Euclidean,
    /// Rescaled logarithmic fidelity; larger is closer.
    Rlf,
    /// Gaussian kernel similarity; larger is closer.
    Gaussian,
}

impl Metric {
    /// True when larger values mean *more* similar.
    fn is_similarity(self) -> bool {
        !matches!(self, Metric::Euclidean)
    }
}

/// k-NN hyperparameters.
///
/// `kernel` supplies the β/ε used by [`Metric::Rlf`] and the σ used by
/// [`Metric::Gaussian`]; it is ignored under [`Metric::Euclidean`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    /// Number of neighbours that vote. Must be ≥ 1 and ≤ |labeled|.
    pub k: usize,
    /// Measure used to rank candidates.
    pub metric: Metric,
    /// Kernel hyperparameters for the non-Euclidean metrics.
    pub kernel: KernelConfig,
}

impl KnnConfig {
    /// Configuration with `k` Euclidean neighbours and default kernel
    /// hyperparameters.
    pub fn new(k: usize) -> Self {
        KnnConfig {
            k,
            metric: Metric::Euclidean,
            kernel: KernelConfig::default(),
        }
    }
}

/// Classifies one sample; see [`knn_predict_batch`] for the full contract.
pub fn knn_classify(y: &Sample, labeled: &[Sample], cfg: &KnnConfig) -> Result<usize> {
    Ok(knn_predict_batch(std::slice::from_ref(y), labeled, cfg)?[0])
}

/// Classifies every query by majority vote among its `k` nearest labeled
/// samples under `cfg.metric`.
///
/// Neighbour ranking breaks exact ties by the labeled sample's position
/// (earlier wins). Vote ties are broken by the better mean metric over each
/// tied class's neighbours — smaller mean distance, or larger mean
/// similarity — and, if still tied, by the lowest class index.
///
/// Errors with [`Error::Config`] when `k` is zero, the labeled set has fewer
/// than `k` samples, or a labeled sample carries no label; with
/// [`Error::Dimension`] on mixed feature counts.
pub fn knn_predict_batch(ys: &[Sample], labeled: &[Sample], cfg: &KnnConfig) -> Result<Vec<usize>> {
    if cfg.k == 0 {
        return Err(Error::Config("knn requires k >= 1".into()));
    }
    if labeled.len() < cfg.k {
        return Err(Error::Config(format!(
            "knn with k = {} needs at least k labeled samples, got {}",
            cfg.k,
            labeled.len()
        )));
    }
    check_same_dim(labeled.iter().chain(ys))?;
    let labels = labeled
        .iter()
        .map(|s| {
            s.label().ok_or_else(|| {
                Error::Config(format!("labeled sample {} carries no label", s.id().0))
            })
        })
        .collect::<Result<Vec<usize>>>()?;

    let scores = match cfg.metric {
        Metric::Euclidean => euclidean_matrix(ys, labeled),
        Metric::Rlf => rlf_matrix(ys, labeled, cfg.kernel.epsilon(), cfg.kernel.beta()),
        Metric::Gaussian => {
            let mut m = euclidean_matrix(ys, labeled);
            for v in m.data_mut() {
                *v = gaussian_from_distance(*v, cfg.kernel.sigma());
            }
            m
        }
    };

    let mut out = Vec::with_capacity(ys.len());
    for q in 0..ys.len() {
        out.push(vote(scores.row(q), &labels, cfg.k, cfg.metric));
    }
    Ok(out)
}

/// Majority vote among the `k` best-ranked labeled samples for one query row.
fn vote(row: &[f64], labels: &[usize], k: usize, metric: Metric) -> usize {
    let mut order: Vec<usize> = (0..row.len()).collect();
    if metric.is_similarity() {
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap());
    } else {
        order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap());
    }

    // class -> (votes, metric sum over that class's neighbours)
    let mut tally: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for &i in &order[..k] {
        let entry = tally.entry(labels[i]).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += row[i];
    }

    let mut best: Option<(usize, usize, f64)> = None;
    for (&class, &(votes, sum)) in &tally {
        let mean = sum / votes as f64;
        let better = match best {
            None => true,
            Some((_, best_votes, best_mean)) => {
                votes > best_votes
                    || (votes == best_votes
                        && if metric.is_similarity() {
                            mean > best_mean
                        } else {
                            mean < best_mean
                        })
            }
        };
        if better {
            best = Some((class, votes, mean));
        }
    }
    // tally is non-empty because k >= 1.
    best.unwrap().0
}

/// Errors with [`Error::Dimension`] unless every sample has the same number
/// of features as the first.
fn check_same_dim<'a>(mut samples: impl Iterator<Item = &'a Sample>) -> Result<()> {
    let first = match samples.next() {
        Some(s) => s.dim(),
        None => return Ok(()),
    };
    for s in samples {
        if s.dim() != first {
            return Err(Error::Dimension {
                left: first,
                right: s.dim(),
            });
        }
    }
    Ok(())
}
