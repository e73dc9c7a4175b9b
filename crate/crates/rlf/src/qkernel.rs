//! Quantum-inspired kernel functions on classical feature vectors.
//!
//! A feature vector `x ∈ [0,1]^M` is conceptually encoded as the M-qubit
//! product state `⊗_m [cos(x_m·π/2)|0⟩ + sin(x_m·π/2)|1⟩]`. The fidelity
//! (absolute inner product) of two such states factorizes into
//! `∏_m |cos[(π/2)(x1_m − x2_m)]|`, which underflows catastrophically for
//! large M; its guarded base-10 logarithm `F` and the rescaled form
//! `β^F` (computed entirely in the log domain) are the similarities this
//! crate is built around. Two classical kernels (Euclidean distance and a
//! Gaussian) are provided for baseline comparisons, plus a brute-force
//! state-vector oracle used only by tests.
//!
//! All functions here are pure; identical inputs give bit-identical
//! outputs, and every kernel is safe to call concurrently.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque identifier attached to every sample.
///
/// Ids let the semi-supervised machinery track samples across pool and
/// cluster membership (and let evaluation code look up hidden ground-truth
/// labels) without ever comparing feature payloads.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct SampleId(pub u64);

impl std::fmt::Display for SampleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An M-dimensional feature vector in `[0,1]^M` with an optional class label.
///
/// Feature storage is shared (`Arc`), so cloning a `Sample` is cheap; the
/// semi-supervised code moves samples between pools and clusters freely.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    id: SampleId,
    features: Arc<[f64]>,
    label: Option<usize>,
}

impl Sample {
    /// Builds a sample, validating that every feature lies in `[0, 1]`.
    ///
    /// Out-of-range or non-finite features are a hard error — silently
    /// clamping would corrupt the kernel semantics.
    pub fn new(id: SampleId, features: Vec<f64>, label: Option<usize>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Config(
                "a sample must have at least one feature".into(),
            ));
        }
        for (index, &value) in features.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::FeatureRange { index, value });
            }
        }
        Ok(Sample {
            id,
            features: features.into(),
            label,
        })
    }

    pub fn id(&self) -> SampleId {
        self.id
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Number of features M.
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    /// A copy of this sample with the label removed (storage shared).
    pub fn without_label(&self) -> Sample {
        Sample {
            id: self.id,
            features: Arc::clone(&self.features),
            label: None,
        }
    }

    /// A copy of this sample carrying `label` (storage shared).
    pub fn with_label(&self, label: usize) -> Sample {
        Sample {
            id: self.id,
            features: Arc::clone(&self.features),
            label: Some(label),
        }
    }
}

/// Kernel hyperparameters: rescaling factor β, log guard ε, Gaussian width σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    beta: f64,
    epsilon: f64,
    sigma: f64,
}

impl KernelConfig {
    /// Default rescaling factor; small-N MNIST accuracy peaks near here.
    pub const DEFAULT_BETA: f64 = 1.3;
    /// Default log guard added inside each |cos| factor.
    pub const DEFAULT_EPSILON: f64 = 1e-10;
    /// Default Gaussian kernel width.
    pub const DEFAULT_SIGMA: f64 = 1.0;

    /// Validates `beta > 0`, `epsilon > 0`, `sigma > 0` (all finite).
    pub fn new(beta: f64, epsilon: f64, sigma: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Config(format!(
                "beta must be a finite positive number, got {beta}"
            )));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be a finite positive number, got {epsilon}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be a finite positive number, got {sigma}"
            )));
        }
        Ok(KernelConfig {
            beta,
            epsilon,
            sigma,
        })
    }

    /// Convenience constructor varying only β.
    pub fn with_beta(beta: f64) -> Result<Self> {
        Self::new(beta, Self::DEFAULT_EPSILON, Self::DEFAULT_SIGMA)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            beta: Self::DEFAULT_BETA,
            epsilon: Self::DEFAULT_EPSILON,
            sigma: Self::DEFAULT_SIGMA,
        }
    }
}

/// Largest M for which the brute-force state-vector oracle will run
/// (2^14 amplitudes); the analytic kernels have no such cap.
pub const MAX_ORACLE_QUBITS: usize = 14;

/// Brute-force M-qubit product-state amplitudes — a test oracle only.
///
/// The analytic kernels never materialize this vector; it exists so tests
/// can verify the factorized fidelity formula against a literal inner
/// product of encoded states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<f64>,
}

impl StateVector {
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Inner product ⟨self, other⟩ (all amplitudes are real).
    pub fn inner(&self, other: &StateVector) -> Result<f64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::Dimension {
                left: self.amplitudes.len(),
                right: other.amplitudes.len(),
            });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a * b)
            .sum())
    }
}

/// Encodes a sample as the full 2^M-amplitude product state.
///
/// Errors if `M > MAX_ORACLE_QUBITS` — the amplitude vector grows as 2^M
/// and this function exists only to cross-check the analytic kernels.
pub fn feature_map_state(x: &Sample) -> Result<StateVector> {
    let m = x.dim();
    if m > MAX_ORACLE_QUBITS {
        return Err(Error::Config(format!(
            "state-vector oracle supports at most {MAX_ORACLE_QUBITS} features, got {m}"
        )));
    }
    let mut amplitudes = vec![1.0f64];
    for &feature in x.features() {
        let angle = FRAC_PI_2 * feature;
        let (c, s) = (angle.cos(), angle.sin());
        let mut next = Vec::with_capacity(amplitudes.len() * 2);
        for &amp in &amplitudes {
            next.push(amp * c);
            next.push(amp * s);
        }
        amplitudes = next;
    }
    Ok(StateVector { amplitudes })
}

fn check_dims(x1: &Sample, x2: &Sample) -> Result<()> {
    if x1.dim() != x2.dim() {
        return Err(Error::Dimension {
            left: x1.dim(),
            right: x2.dim(),
        });
    }
    Ok(())
}

/// State fidelity `∏_m |cos[(π/2)(x1_m − x2_m)]|`, in [0, 1].
///
/// Symmetric in its arguments. For high-dimensional inputs the product
/// underflows toward zero — that orthogonality catastrophe is exactly what
/// [`log_fidelity`] and [`rlf`] exist to tame.
pub fn fidelity(x1: &Sample, x2: &Sample) -> Result<f64> {
    check_dims(x1, x2)?;
    let mut product = 1.0f64;
    for (&a, &b) in x1.features().iter().zip(x2.features()) {
        product *= (FRAC_PI_2 * (a - b).abs()).cos().abs();
    }
    Ok(product)
}

/// Term contributed to the log fidelity by one pair of differing features.
///
/// The absolute difference is taken *before* the cosine. Mathematically a
/// no-op (cos is even), but it makes the term — and therefore the whole
/// sum — exactly symmetric under argument swap at the bit level.
#[inline]
pub(crate) fn log_fid_term(a: f64, b: f64, epsilon: f64) -> f64 {
    ((FRAC_PI_2 * (a - b).abs()).cos().abs() + epsilon).log10()
}

/// Term contributed by a feature pair with exactly equal values
/// (cos 0 = 1 exactly, so the term is the constant log₁₀(1+ε)).
#[inline]
pub(crate) fn log_fid_equal_term(epsilon: f64) -> f64 {
    (1.0 + epsilon).log10()
}

/// Canonical evaluation of `F = Σ_m log₁₀(|cos[(π/2)Δ_m]| + ε)`.
///
/// The reduction order is pinned so that every evaluation path in the
/// crate (scalar calls, the byte-quantized fast path, cached matrices)
/// produces bit-identical values:
///
/// * features with `x_m == y_m` bitwise contribute `count · log₁₀(1+ε)`
///   at the end (their term is an exact constant);
/// * differing features accumulate into four interleaved accumulators
///   (index = running count of differing features mod 4, breaking the
///   floating-point add latency chain) combined as `(a0+a1) + (a2+a3)`.
pub(crate) fn log_fid_sum(xs: &[f64], ys: &[f64], epsilon: f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut unequal = 0usize;
    let mut equal = 0usize;
    for (&a, &b) in xs.iter().zip(ys) {
        if a == b {
            equal += 1;
        } else {
            acc[unequal & 3] += log_fid_term(a, b, epsilon);
            unequal += 1;
        }
    }
    let spread = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    spread + (equal as f64) * log_fid_equal_term(epsilon)
}

/// Logarithmic fidelity `F = Σ_m log₁₀(|cos[(π/2)(x1_m − x2_m)]| + ε)`.
///
/// The ε guard keeps every term finite (a fully orthogonal feature pair
/// contributes log₁₀ ε instead of −∞), so the result is never −∞ or NaN.
/// As ε → 0 this converges to log₁₀ of [`fidelity`].
pub fn log_fidelity(x1: &Sample, x2: &Sample, cfg: &KernelConfig) -> Result<f64> {
    check_dims(x1, x2)?;
    Ok(log_fid_sum(x1.features(), x2.features(), cfg.epsilon))
}

/// Maps a log fidelity `F` to the rescaled similarity `β^F`.
///
/// Evaluated as `10^(F · log₁₀ β)` so extreme F cannot overflow an
/// intermediate. Underflow is clamped to the smallest positive normal
/// value, and for β ≥ 1 the result is clamped into (0, 1] — without the
/// upper clamp the ε guard would let exactly-equal samples score a few
/// parts in 10⁸ above one at large M.
#[inline]
pub(crate) fn rlf_from_log_fidelity(f: f64, beta: f64) -> f64 {
    let raw = 10f64.powf(f * beta.log10());
    let clamped = raw.max(f64::MIN_POSITIVE);
    if beta >= 1.0 {
        clamped.min(1.0)
    } else {
        clamped
    }
}

/// Rescaled logarithmic fidelity `f̃_β = β^F` with `F = log_fidelity(...)`.
///
/// β = 10 recovers the raw fidelity (base-10 logs cancel); β near 1
/// compresses the similarity scale, counteracting the exponential decay of
/// fidelity with M. β = 1 is degenerate (every pair scores exactly 1).
pub fn rlf(x1: &Sample, x2: &Sample, cfg: &KernelConfig) -> Result<f64> {
    let f = log_fidelity(x1, x2, cfg)?;
    Ok(rlf_from_log_fidelity(f, cfg.beta))
}

/// Slice-level Euclidean distance (shared with the baseline engines).
pub(crate) fn euclidean_slice(xs: &[f64], ys: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    for (&a, &b) in xs.iter().zip(ys) {
        let d = a - b;
        sum += d * d;
    }
    sum.sqrt()
}

/// Euclidean distance `‖x1 − x2‖₂`.
///
/// Note this is a *distance* — smaller means more similar — so consumers
/// ranking by similarity must negate or invert it.
pub fn euclidean(x1: &Sample, x2: &Sample) -> Result<f64> {
    check_dims(x1, x2)?;
    Ok(euclidean_slice(x1.features(), x2.features()))
}

/// Maps an already-computed Euclidean distance through the Gaussian kernel.
///
/// Shared by [`gaussian`] and the batch paths in `baselines` so that scalar
/// and matrix evaluations of the same distance are bitwise identical.
pub(crate) fn gaussian_from_distance(d: f64, sigma: f64) -> f64 {
    (-d * d / (2.0 * sigma * sigma)).exp().max(f64::MIN_POSITIVE)
}

/// Gaussian kernel `exp(−‖x1 − x2‖² / (2σ²))`, in (0, 1].
///
/// Equals 1 exactly iff the samples are identical. Underflow at extreme
/// distance/width combinations is clamped to the smallest positive normal
/// value to keep the advertised open lower bound.
pub fn gaussian(x1: &Sample, x2: &Sample, cfg: &KernelConfig) -> Result<f64> {
    let d = euclidean(x1, x2)?;
    Ok(gaussian_from_distance(d, cfg.sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(id: u64, features: &[f64]) -> Sample {
        Sample::new(SampleId(id), features.to_vec(), None).unwrap()
    }

    fn cfg_beta(beta: f64) -> KernelConfig {
        KernelConfig::with_beta(beta).unwrap()
    }

    #[test]
    fn sample_rejects_out_of_range_features() {
        let err = Sample::new(SampleId(0), vec![0.2, 1.5, 0.1], None).unwrap_err();
        match err {
            Error::FeatureRange { index, value } => {
                assert_eq!(index, 1);
                assert_eq!(value, 1.5);
            }
            other => panic!("unexpected error: {other}"),
        }
        assert!(Sample::new(SampleId(0), vec![-0.01], None).is_err());
        assert!(Sample::new(SampleId(0), vec![f64::NAN], None).is_err());
        assert!(Sample::new(SampleId(0), vec![], None).is_err());
    }

    #[test]
    fn kernel_config_validates_parameters() {
        assert!(KernelConfig::new(0.0, 1e-10, 1.0).is_err());
        assert!(KernelConfig::new(-1.0, 1e-10, 1.0).is_err());
        assert!(KernelConfig::new(1.3, 0.0, 1.0).is_err());
        assert!(KernelConfig::new(1.3, 1e-10, 0.0).is_err());
        assert!(KernelConfig::new(f64::INFINITY, 1e-10, 1.0).is_err());
        // β = 1 is degenerate (every similarity is exactly 1) but legal —
        // sweeps over β include it as the flat-curve endpoint.
        assert!(KernelConfig::new(1.0, 1e-10, 1.0).is_ok());
    }

    #[test]
    fn feature_map_trivial_states() {
        let s0 = feature_map_state(&sample(0, &[0.0])).unwrap();
        assert_eq!(s0.amplitudes(), &[1.0, 0.0]);

        let s1 = feature_map_state(&sample(1, &[1.0])).unwrap();
        let amps = s1.amplitudes();
        assert!(amps[0].abs() < 1e-15, "cos(pi/2) should be ~0");
        assert!((amps[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn feature_map_half_half_is_uniform() {
        let s = feature_map_state(&sample(0, &[0.5, 0.5])).unwrap();
        assert_eq!(s.amplitudes().len(), 4);
        for &a in s.amplitudes() {
            assert!((a - 0.5).abs() < 1e-15, "expected 0.5, got {a}");
        }
    }

    #[test]
    fn feature_map_guards_dimension() {
        let big = Sample::new(SampleId(0), vec![0.5; MAX_ORACLE_QUBITS + 1], None).unwrap();
        assert!(feature_map_state(&big).is_err());
        let ok = Sample::new(SampleId(0), vec![0.5; MAX_ORACLE_QUBITS], None).unwrap();
        assert_eq!(
            feature_map_state(&ok).unwrap().amplitudes().len(),
            1 << MAX_ORACLE_QUBITS
        );
    }

    #[test]
    fn fidelity_trivial_cases() {
        let a = sample(0, &[0.3, 0.7, 0.1]);
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);

        let zero = sample(1, &[0.0]);
        let one = sample(2, &[1.0]);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-15);

        let half = sample(3, &[0.5, 0.5]);
        let origin = sample(4, &[0.0, 0.0]);
        assert!((fidelity(&half, &origin).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_matches_state_vector_inner_product() {
        let half = sample(0, &[0.5, 0.5]);
        let origin = sample(1, &[0.0, 0.0]);
        let f = fidelity(&half, &origin).unwrap();
        let inner = feature_map_state(&half)
            .unwrap()
            .inner(&feature_map_state(&origin).unwrap())
            .unwrap();
        assert!((f - inner.abs()).abs() <= 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = sample(0, &[0.1, 0.2]);
        let b = sample(1, &[0.1]);
        match fidelity(&a, &b).unwrap_err() {
            Error::Dimension { left, right } => {
                assert_eq!((left, right), (2, 1));
            }
            other => panic!("unexpected error: {other}"),
        }
        assert!(log_fidelity(&a, &b, &KernelConfig::default()).is_err());
        assert!(rlf(&a, &b, &KernelConfig::default()).is_err());
        assert!(euclidean(&a, &b).is_err());
        assert!(gaussian(&a, &b, &KernelConfig::default()).is_err());
    }

    #[test]
    fn log_fidelity_examples() {
        let cfg = KernelConfig::default();

        // Identical samples: M·log10(1+eps), tiny but positive.
        let a = sample(0, &[0.2, 0.4, 0.9]);
        let f = log_fidelity(&a, &a, &cfg).unwrap();
        assert!(f.abs() < 1e-8);
        assert!(f > 0.0);

        // Orthogonal single feature: the guard dominates, giving exactly -10.
        let zero = sample(1, &[0.0]);
        let one = sample(2, &[1.0]);
        let f = log_fidelity(&zero, &one, &cfg).unwrap();
        assert!((f - (-10.0)).abs() < 1e-6);

        // Half/origin pair: 2·log10(cos(pi/4) + 1e-10), frozen via a
        // 50-digit decimal evaluation.
        let half = sample(3, &[0.5, 0.5]);
        let origin = sample(4, &[0.0, 0.0]);
        let f = log_fidelity(&half, &origin, &cfg).unwrap();
        assert!((f - (-0.3010299955411442)).abs() < 1e-12);
        // ... which must agree with log10 of the fidelity to 1e-9.
        let via_fidelity = fidelity(&half, &origin).unwrap().log10();
        assert!((f - via_fidelity).abs() <= 1e-9);
    }

    #[test]
    fn rlf_examples() {
        let half = sample(0, &[0.5, 0.5]);
        let origin = sample(1, &[0.0, 0.0]);

        // beta = 10 recovers fidelity.
        let r10 = rlf(&half, &origin, &cfg_beta(10.0)).unwrap();
        assert!((r10 - fidelity(&half, &origin).unwrap()).abs() <= 1e-9);

        // Identical samples score 1 for any beta.
        let a = sample(2, &[0.3, 0.6, 0.8]);
        for beta in [1.1, 1.3, 2.0, 5.0, 10.0] {
            let r = rlf(&a, &a, &cfg_beta(beta)).unwrap();
            assert!((r - 1.0).abs() <= 1e-8, "beta {beta}: got {r}");
        }

        // 1.3^F for the half/origin pair, frozen via 50-digit evaluation
        // (the coarser 0.92406 figure corresponds to the rounded exponent
        // -0.30103).
        let r = rlf(&half, &origin, &cfg_beta(1.3)).unwrap();
        assert!((r - 0.9240588551096853).abs() < 1e-12);
        assert!((r - 0.92406).abs() < 1e-5);
    }

    #[test]
    fn rlf_extreme_inputs_stay_finite() {
        // Maximally distant pair at M = 784: fidelity underflows to zero,
        // rlf clamps to the smallest positive normal value; nothing NaNs.
        let zeros = Sample::new(SampleId(0), vec![0.0; 784], None).unwrap();
        let ones = Sample::new(SampleId(1), vec![1.0; 784], None).unwrap();
        let cfg = KernelConfig::default();

        let f = fidelity(&zeros, &ones).unwrap();
        assert_eq!(f, 0.0);

        let lf = log_fidelity(&zeros, &ones, &cfg).unwrap();
        assert!(lf.is_finite());
        assert!((lf - (-7840.0)).abs() < 1e-3);

        for beta in [1.3, 10.0] {
            let r = rlf(&zeros, &ones, &cfg_beta(beta)).unwrap();
            assert_eq!(r, f64::MIN_POSITIVE);
        }

        // Identical 784-dim samples stay clamped at exactly 1.
        let r = rlf(&zeros, &zeros, &cfg_beta(10.0)).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn euclidean_examples() {
        let a = sample(0, &[0.3, 0.7]);
        assert_eq!(euclidean(&a, &a).unwrap(), 0.0);

        let origin = sample(1, &[0.0, 0.0]);
        let p = sample(2, &[0.3, 0.4]);
        assert!((euclidean(&origin, &p).unwrap() - 0.5).abs() < 1e-15);

        let zero = sample(3, &[0.0]);
        let one = sample(4, &[1.0]);
        assert_eq!(euclidean(&zero, &one).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_examples() {
        let a = sample(0, &[0.1, 0.9, 0.4]);
        for sigma in [0.1, 0.5, 2.0] {
            let cfg = KernelConfig::new(1.3, 1e-10, sigma).unwrap();
            assert_eq!(gaussian(&a, &a, &cfg).unwrap(), 1.0);
        }

        // f_E = 0.5 at sigma = 0.5: exp(-0.5).
        let cfg = KernelConfig::new(1.3, 1e-10, 0.5).unwrap();
        let origin = sample(1, &[0.0, 0.0]);
        let p = sample(2, &[0.3, 0.4]);
        let g = gaussian(&origin, &p, &cfg).unwrap();
        assert!((g - 0.6065306597126334).abs() < 1e-12);

        // Monotone decay toward 0 with growing distance.
        let far = Sample::new(SampleId(3), vec![1.0; 784], None).unwrap();
        let near = Sample::new(SampleId(4), vec![0.0; 784], None).unwrap();
        let g_far = gaussian(&far, &near, &cfg).unwrap();
        assert!(g_far > 0.0 && g_far < 1e-100);
    }

    #[test]
    fn log_fidelity_upper_bound_is_exact_on_equal_samples() {
        let cfg = KernelConfig::default();
        let x = sample(0, &[0.11, 0.42, 0.87, 0.5]);
        let bound = 4.0 * (1.0f64 + cfg.epsilon()).log10();
        assert_eq!(log_fidelity(&x, &x, &cfg).unwrap(), bound);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn prop_oracle_equivalence(
            features in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..=12)
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = features.into_iter().unzip();
            let x1 = Sample::new(SampleId(0), xs, None).unwrap();
            let x2 = Sample::new(SampleId(1), ys, None).unwrap();
            let analytic = fidelity(&x1, &x2).unwrap();
            let inner = feature_map_state(&x1).unwrap()
                .inner(&feature_map_state(&x2).unwrap()).unwrap();
            prop_assert!((analytic - inner.abs()).abs() <= 1e-10);
        }

        #[test]
        fn prop_state_vectors_are_normalized(
            features in proptest::collection::vec(0.0f64..=1.0, 1..=10)
        ) {
            let x = Sample::new(SampleId(0), features, None).unwrap();
            let norm2: f64 = feature_map_state(&x).unwrap()
                .amplitudes().iter().map(|a| a * a).sum();
            prop_assert!((norm2 - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn prop_kernels_are_symmetric(
            features in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..=50)
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = features.into_iter().unzip();
            let x1 = Sample::new(SampleId(0), xs, None).unwrap();
            let x2 = Sample::new(SampleId(1), ys, None).unwrap();
            let cfg = KernelConfig::default();

            // Exact symmetry for all five kernels (stronger than the
            // 1e-12 requirement: the |Δ|-before-cos form makes even the
            // log-domain kernels bit-symmetric).
            prop_assert_eq!(fidelity(&x1, &x2).unwrap(), fidelity(&x2, &x1).unwrap());
            prop_assert_eq!(euclidean(&x1, &x2).unwrap(), euclidean(&x2, &x1).unwrap());
            prop_assert_eq!(
                gaussian(&x1, &x2, &cfg).unwrap(),
                gaussian(&x2, &x1, &cfg).unwrap()
            );
            prop_assert_eq!(
                log_fidelity(&x1, &x2, &cfg).unwrap(),
                log_fidelity(&x2, &x1, &cfg).unwrap()
            );
            prop_assert_eq!(rlf(&x1, &x2, &cfg).unwrap(), rlf(&x2, &x1, &cfg).unwrap());
        }

        #[test]
        fn prop_ranges(
            features in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..=50),
            beta in 1.000001f64..=10.0
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = features.into_iter().unzip();
            let m = xs.len();
            let x1 = Sample::new(SampleId(0), xs, None).unwrap();
            let x2 = Sample::new(SampleId(1), ys, None).unwrap();
            let cfg = KernelConfig::with_beta(beta).unwrap();

            let f = fidelity(&x1, &x2).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));

            let r = rlf(&x1, &x2, &cfg).unwrap();
            prop_assert!(r > 0.0 && r <= 1.0);

            let g = gaussian(&x1, &x2, &cfg).unwrap();
            prop_assert!(g > 0.0 && g <= 1.0);

            let lf = log_fidelity(&x1, &x2, &cfg).unwrap();
            prop_assert!(lf <= m as f64 * (1.0 + cfg.epsilon()).log10());
        }

        #[test]
        fn prop_monotone_consistency(
            shared in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..=30),
            beta in 1.01f64..=10.0
        ) {
            // On random continuous data the epsilon guard never dominates a
            // factor, so ordering by fidelity and ordering by rlf agree for
            // every beta > 1. (Adversarial stacks of sub-epsilon factors
            // can flip the order; they are unreachable here.)
            let (xs, rest): (Vec<f64>, Vec<(f64, f64)>) =
                shared.into_iter().map(|(x, a, b)| (x, (a, b))).unzip();
            let (avs, bvs): (Vec<f64>, Vec<f64>) = rest.into_iter().unzip();
            let x1 = Sample::new(SampleId(0), xs, None).unwrap();
            let a = Sample::new(SampleId(1), avs, None).unwrap();
            let b = Sample::new(SampleId(2), bvs, None).unwrap();
            let cfg = KernelConfig::with_beta(beta).unwrap();

            let (fa, fb) = (fidelity(&x1, &a).unwrap(), fidelity(&x1, &b).unwrap());
            if fa > fb && fb > 0.0 {
                prop_assert!(rlf(&x1, &a, &cfg).unwrap() > rlf(&x1, &b, &cfg).unwrap());
            }
        }

        #[test]
        fn prop_feature_permutation_invariance(
            features in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 2..=40),
            seed in 0u64..1000
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;

            let (xs, ys): (Vec<f64>, Vec<f64>) = features.iter().cloned().unzip();
            let mut order: Vec<usize> = (0..xs.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let pxs: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
            let pys: Vec<f64> = order.iter().map(|&i| ys[i]).collect();

            let x1 = Sample::new(SampleId(0), xs, None).unwrap();
            let x2 = Sample::new(SampleId(1), ys, None).unwrap();
            let p1 = Sample::new(SampleId(2), pxs, None).unwrap();
            let p2 = Sample::new(SampleId(3), pys, None).unwrap();
            let cfg = KernelConfig::default();

            prop_assert!((fidelity(&x1, &x2).unwrap() - fidelity(&p1, &p2).unwrap()).abs() <= 1e-12);
            prop_assert!((euclidean(&x1, &x2).unwrap() - euclidean(&p1, &p2).unwrap()).abs() <= 1e-12);
            prop_assert!((gaussian(&x1, &x2, &cfg).unwrap() - gaussian(&p1, &p2, &cfg).unwrap()).abs() <= 1e-12);
            prop_assert!((log_fidelity(&x1, &x2, &cfg).unwrap() - log_fidelity(&p1, &p2, &cfg).unwrap()).abs() <= 1e-10);
            prop_assert!((rlf(&x1, &x2, &cfg).unwrap() - rlf(&p1, &p2, &cfg).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn prop_no_nan_anywhere(
            features in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..=100),
            beta in 0.5f64..=10.0
        ) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = features.into_iter().unzip();
            let x1 = Sample::new(SampleId(0), xs, None).unwrap();
            let x2 = Sample::new(SampleId(1), ys, None).unwrap();
            let cfg = KernelConfig::with_beta(beta).unwrap();

            prop_assert!(fidelity(&x1, &x2).unwrap().is_finite());
            prop_assert!(log_fidelity(&x1, &x2, &cfg).unwrap().is_finite());
            prop_assert!(rlf(&x1, &x2, &cfg).unwrap().is_finite());
            prop_assert!(euclidean(&x1, &x2).unwrap().is_finite());
            prop_assert!(gaussian(&x1, &x2, &cfg).unwrap().is_finite());
        }
    }
}
