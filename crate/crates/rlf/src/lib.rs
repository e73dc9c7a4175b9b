//! Rescaled-logarithmic-fidelity (RLF) kernels and the non-parametric
//! classification algorithms built on them.
//!
//! The crate is organized bottom-up:
//!
//! * [`qkernel`] — the kernel functions themselves: quantum feature-map
//!   fidelity, its guarded logarithm, the rescaled form `β^F`, and the
//!   Euclidean/Gaussian baseline kernels.
//! * [`classifier`] — clusters of (pseudo-)labeled samples, effective
//!   vectors (per-cluster average RLF), argmax classification with
//!   confidence scores: the supervised method.
//! * [`nssl`] — semi-supervised pseudo-labeling with confidence-ranked
//!   eviction, plus fully unsupervised seeding and clustering.
//! * [`baselines`] — KNN, naive Bayes, k-means, spectral clustering, and
//!   kernel-swapped variants of the supervised method.
//! * [`data`] — MNIST IDX and CSV ingestion, stratified splitting.
//! * [`harness`] — the experiment runner behind the `rlf` CLI.

pub mod baselines;
pub mod classifier;
pub mod data;
pub mod error;
pub mod harness;
pub mod nssl;
pub mod qkernel;

mod mat;
mod pairwise;

pub use error::{Error, Result};
