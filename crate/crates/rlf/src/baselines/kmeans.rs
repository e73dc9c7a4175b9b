//! Lloyd k-means with deterministic seeding and tie-breaking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::qkernel::Sample;
use crate::{Error, Result};

/// k-means hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmeansConfig {
    /// Number of clusters. Must be ≥ 1 and ≤ |pool|.
    pub k: usize,
    /// Upper bound on Lloyd iterations; the loop exits early on an exact
    /// assignment fixed point. Must be ≥ 1.
    pub iterations: usize,
    /// Seed for the initial center draw.
    pub rng_seed: u64,
}

impl KmeansConfig {
    /// Default iteration budget; comfortably past convergence at the scales
    /// this crate runs.
    pub const DEFAULT_ITERATIONS: usize = 270;

    /// Configuration with `k` clusters, the default iteration budget, and
    /// seed 42.
    pub fn new(k: usize) -> Self {
        KmeansConfig {
            k,
            iterations: Self::DEFAULT_ITERATIONS,
            rng_seed: 42,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k-means requires k >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("k-means requires iterations >= 1".into()));
        }
        Ok(())
    }
}

/// Clusters `pool` into `cfg.k` groups; returns one cluster index per pool
/// position. Labels on the samples, if any, are ignored.
///
/// Centers start as `k` distinct pool points drawn by a seeded RNG. Each
/// iteration assigns every point to its nearest center by Euclidean distance
/// (exact ties to the lowest center index) and replaces each center with its
/// cluster mean. A center left with no members is re-seeded to the point
/// currently farthest from its own center, which the next assignment pass
/// then captures. Identical inputs produce bitwise-identical assignments.
pub fn kmeans(pool: &[Sample], cfg: &KmeansConfig) -> Result<Vec<usize>> {
    let points: Vec<&[f64]> = pool.iter().map(|s| s.features()).collect();
    kmeans_points(&points, cfg)
}

/// [`kmeans`] on raw coordinate rows; also serves the spectral-embedding
/// stage, whose rows are not domain-constrained samples.
pub(crate) fn kmeans_points(points: &[&[f64]], cfg: &KmeansConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let n = points.len();
    if n < cfg.k {
        return Err(Error::Config(format!(
            "k-means with k = {} needs at least k points, got {n}",
            cfg.k
        )));
    }
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(Error::Dimension {
                left: dim,
                right: p.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut chosen = rand::seq::index::sample(&mut rng, n, cfg.k).into_vec();
    chosen.sort_unstable();
    let mut centers: Vec<Vec<f64>> = chosen.iter().map(|&i| points[i].to_vec()).collect();

    let mut assignments: Vec<usize> = vec![0; n];
    for it in 0..cfg.iterations {
        let mut next = vec![0usize; n];
        for (i, point) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = dist_sq(point, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = dist_sq(point, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            next[i] = best;
        }

        let mut counts = vec![0usize; cfg.k];
        for &c in &next {
            counts[c] += 1;
        }
        // Re-seed each empty cluster to the point farthest from its own
        // center (ties to the lowest point index; each empty cluster takes a
        // distinct point). The assignment itself is untouched: if every
        // distance is zero (all points coincide) the re-seed changes nothing
        // and the configuration is already stable; otherwise the next
        // assignment pass pulls points over to the relocated center.
        let mut taken = vec![false; n];
        for c in 0..cfg.k {
            if counts[c] > 0 {
                continue;
            }
            let mut farthest: Option<(usize, f64)> = None;
            for (i, point) in points.iter().enumerate() {
                if taken[i] {
                    continue;
                }
                let d = dist_sq(point, &centers[next[i]]);
                if farthest.map_or(true, |(_, fd)| d > fd) {
                    farthest = Some((i, d));
                }
            }
            // n >= k guarantees a candidate for every empty cluster.
            let (i, _) = farthest.unwrap();
            taken[i] = true;
            centers[c] = points[i].to_vec();
        }

        let converged = it > 0 && next == assignments;
        assignments = next;
        if converged {
            break;
        }

        // Mean update, skipping memberless clusters so a re-seeded center
        // keeps its coordinates until the next pass assigns it points.
        let mut sums = vec![vec![0.0f64; dim]; cfg.k];
        for (point, &c) in points.iter().zip(&assignments) {
            for (acc, &v) in sums[c].iter_mut().zip(*point) {
                *acc += v;
            }
        }
        for c in 0..cfg.k {
            if counts[c] > 0 {
                let len = counts[c] as f64;
                for (dst, &s) in centers[c].iter_mut().zip(&sums[c]) {
                    *dst = s / len;
                }
            }
        }
    }
    Ok(assignments)
}

/// Squared Euclidean distance — the k-means objective's natural unit, and
/// the same minimizer as the plain distance.
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        sum += d * d;
    }
    sum
}
