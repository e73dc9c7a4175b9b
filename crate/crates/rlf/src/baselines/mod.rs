//! Reference classifiers and clusterers the RLF pipelines are compared
//! against.
//!
//! Everything here is deliberately conventional: k-nearest-neighbour,
//! Bernoulli naive Bayes, Lloyd k-means, and spectral clustering in the
//! standard normalized-cuts formulation, plus a kernel-swapped variant of the
//! non-parametric supervised classifier. The implementations favour
//! determinism over speed — every seeded entry point returns bitwise-identical
//! output for identical inputs — so that experiment deltas are attributable
//! to the method, never to the run.

mod jacobi;
mod kernel_nsl;
mod kmeans;
mod knn;
mod naive_bayes;
mod spectral;

pub use kernel_nsl::{kernel_nsl_predict, NslKernel};
pub use kmeans::{kmeans, KmeansConfig};
pub use knn::{knn_classify, knn_predict_batch, KnnConfig, Metric};
pub use naive_bayes::{naive_bayes_fit, NaiveBayes};
pub use spectral::{spectral_clustering, SigmaSpec, SpectralConfig};
