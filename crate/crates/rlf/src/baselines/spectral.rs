//! Spectral clustering in the normalized-cuts formulation.
//!
//! Standard pipeline: Gaussian affinity on a seeded subsample, symmetric
//! normalized Laplacian, the `k` eigenvectors of its smallest eigenvalues as
//! an embedding, row normalization, then k-means on the embedded rows.
//! Points outside the subsample inherit the cluster of their nearest
//! subsampled point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::jacobi::jacobi_eigen;
use super::kmeans::{kmeans_points, KmeansConfig};
use crate::mat::Mat;
use crate::qkernel::{euclidean_slice, gaussian_from_distance, Sample};
use crate::{Error, Result};

/// Affinity bandwidth: a fixed width, or the median pairwise distance of the
/// subsample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaSpec {
    /// Use this σ directly; must be positive and finite.
    Fixed(f64),
    /// σ = median over the subsample's pairwise Euclidean distances. Falls
    /// back to 1.0 in the degenerate all-points-coincide case.
    MedianHeuristic,
}

/// Spectral clustering hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Number of clusters. Must be ≥ 1.
    pub k: usize,
    /// Gaussian affinity bandwidth.
    pub sigma: SigmaSpec,
    /// How many pool points enter the eigendecomposition. Must satisfy
    /// `k ≤ subsample ≤ |pool|`.
    pub subsample: usize,
    /// Seed for the subsample draw; the embedding k-means derives its seed
    /// from this one.
    pub rng_seed: u64,
}

impl SpectralConfig {
    /// Default subsample size; keeps the O(n³) eigendecomposition tractable.
    pub const DEFAULT_SUBSAMPLE: usize = 2000;

    /// Configuration with `k` clusters, the median-heuristic bandwidth, the
    /// default subsample size, and seed 42.
    pub fn new(k: usize) -> Self {
        SpectralConfig {
            k,
            sigma: SigmaSpec::MedianHeuristic,
            subsample: Self::DEFAULT_SUBSAMPLE,
            rng_seed: 42,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("spectral clustering requires k >= 1".into()));
        }
        if self.subsample < self.k {
            return Err(Error::Config(format!(
                "spectral subsample {} is smaller than k = {}",
                self.subsample, self.k
            )));
        }
        if let SigmaSpec::Fixed(v) = self.sigma {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "spectral sigma must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Clusters `pool` into `cfg.k` groups; returns one cluster index per pool
/// position. Labels on the samples, if any, are ignored.
///
/// Identical inputs produce bitwise-identical assignments. Errors with
/// [`Error::Config`] on an invalid configuration or a subsample larger than
/// the pool, and with [`Error::Numeric`] if the eigensolver fails to
/// converge.
pub fn spectral_clustering(pool: &[Sample], cfg: &SpectralConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let n = pool.len();
    if cfg.subsample > n {
        return Err(Error::Config(format!(
            "spectral subsample {} exceeds the pool size {n}",
            cfg.subsample
        )));
    }
    let dim = pool[0].dim();
    for s in pool {
        if s.dim() != dim {
            return Err(Error::Dimension {
                left: dim,
                right: s.dim(),
            });
        }
    }
    if cfg.k == 1 {
        return Ok(vec![0; n]);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut sub_idx = rand::seq::index::sample(&mut rng, n, cfg.subsample).into_vec();
    sub_idx.sort_unstable();
    let m = sub_idx.len();

    // Pairwise distances on the subsample, mirrored so the matrix is
    // bitwise symmetric.
    let mut dist = Mat::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let d = euclidean_slice(
                pool[sub_idx[i]].features(),
                pool[sub_idx[j]].features(),
            );
            dist.set(i, j, d);
            dist.set(j, i, d);
        }
    }

    let sigma = match cfg.sigma {
        SigmaSpec::Fixed(v) => v,
        SigmaSpec::MedianHeuristic => median_distance(&dist, m),
    };

    // Gaussian affinity with a zeroed diagonal, then the symmetric
    // normalized Laplacian L = I − D^(−1/2) W D^(−1/2). The affinity clamp
    // keeps every degree strictly positive, so the normalization is safe.
    let mut w = Mat::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let v = gaussian_from_distance(dist.at(i, j), sigma);
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    let inv_sqrt_deg: Vec<f64> = (0..m)
        .map(|i| {
            let deg: f64 = w.row(i).iter().sum();
            1.0 / deg.sqrt()
        })
        .collect();
    let mut lap = Mat::zeros(m, m);
    for i in 0..m {
        lap.set(i, i, 1.0);
        for j in i + 1..m {
            let v = -w.at(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            lap.set(i, j, v);
            lap.set(j, i, v);
        }
    }

    let eig = jacobi_eigen(&lap)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.values[a].partial_cmp(&eig.values[b]).unwrap());
    let selected = &order[..cfg.k];

    // Embedding: row i collects component i of the k chosen eigenvectors,
    // then is scaled to unit length (rows of exact zeros stay zero).
    let mut embedding = vec![vec![0.0f64; cfg.k]; m];
    for (col, &e) in selected.iter().enumerate() {
        let vector = eig.vectors_t.row(e);
        for i in 0..m {
            embedding[i][col] = vector[i];
        }
    }
    for row in &mut embedding {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }

    let embedded_rows: Vec<&[f64]> = embedding.iter().map(|r| r.as_slice()).collect();
    let km = KmeansConfig {
        k: cfg.k,
        iterations: KmeansConfig::DEFAULT_ITERATIONS,
        rng_seed: cfg.rng_seed.wrapping_add(1),
    };
    let sub_assignments = kmeans_points(&embedded_rows, &km)?;

    // Subsampled points keep their cluster; every other point inherits from
    // its nearest subsampled point (ties to the earlier subsample position).
    let mut position_of = vec![usize::MAX; n];
    for (pos, &i) in sub_idx.iter().enumerate() {
        position_of[i] = pos;
    }
    let mut out = Vec::with_capacity(n);
    for (i, s) in pool.iter().enumerate() {
        if position_of[i] != usize::MAX {
            out.push(sub_assignments[position_of[i]]);
            continue;
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (pos, &j) in sub_idx.iter().enumerate() {
            let d = euclidean_slice(s.features(), pool[j].features());
            if d < best_d {
                best = pos;
                best_d = d;
            }
        }
        out.push(sub_assignments[best]);
    }
    Ok(out)
}

/// Median of the strict upper-triangle distances; 1.0 when every distance is
/// zero (or the subsample has a single point) so the affinity stays defined.
fn median_distance(dist: &Mat, m: usize) -> f64 {
    let mut values = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            values.push(dist.at(i, j));
        }
    }
    if values.is_empty() {
        return 1.0;
    }
    values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let median = values[values.len() / 2];
    if median > 0.0 {
        median
    } else {
        1.0
    }
}
