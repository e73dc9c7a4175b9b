//! Bernoulli naive Bayes over binarized features.

use crate::mat::Mat;
use crate::qkernel::Sample;
use crate::{Error, Result};

/// Feature values strictly above this threshold count as "on".
const BINARIZE_THRESHOLD: f64 = 0.5;

/// Laplace smoothing pseudo-count added to each Bernoulli outcome.
const SMOOTHING: f64 = 1.0;

/// Fitted Bernoulli naive Bayes model.
///
/// Features are binarized at 0.5; per-class Bernoulli parameters are
/// estimated with add-one (Laplace) smoothing, so no log is ever taken of
/// zero. Log-probabilities use the natural base — only differences matter
/// for classification.
#[derive(Debug, Clone)]
pub struct NaiveBayes {
    p: usize,
    dim: usize,
    log_prior: Vec<f64>,
    /// `p × dim`; entry (c, m) is log θ_{c,m} = log P(feature m on | class c).
    log_on: Mat,
    /// `p × dim`; entry (c, m) is log (1 − θ_{c,m}).
    log_off: Mat,
}

/// Fits a Bernoulli naive Bayes model on `labeled` with classes
/// `{0, ..., p-1}`.
///
/// Errors with [`Error::ClassCoverage`] when some class has no labeled
/// sample, and with [`Error::Config`] on an empty set, a missing label, or a
/// label outside `{0, ..., p-1}`.
pub fn naive_bayes_fit(labeled: &[Sample], p: usize) -> Result<NaiveBayes> {
    if p == 0 {
        return Err(Error::Config("naive Bayes requires at least one class".into()));
    }
    let first = labeled
        .first()
        .ok_or_else(|| Error::Config("cannot fit naive Bayes on an empty labeled set".into()))?;
    let dim = first.dim();

    let mut class_counts = vec![0usize; p];
    let mut on_counts = Mat::zeros(p, dim);
    for s in labeled {
        if s.dim() != dim {
            return Err(Error::Dimension {
                left: dim,
                right: s.dim(),
            });
        }
        let class = s
            .label()
            .ok_or_else(|| Error::Config(format!("labeled sample {} carries no label", s.id().0)))?;
        if class >= p {
            return Err(Error::Config(format!(
                "sample {} has label {class}, outside {{0, ..., {}}}",
                s.id().0,
                p - 1
            )));
        }
        class_counts[class] += 1;
        let row = on_counts.row_mut(class);
        for (m, &v) in s.features().iter().enumerate() {
            if v > BINARIZE_THRESHOLD {
                row[m] += 1.0;
            }
        }
    }

    let missing: Vec<usize> = (0..p).filter(|&c| class_counts[c] == 0).collect();
    if !missing.is_empty() {
        return Err(Error::ClassCoverage { missing, p });
    }

    let n = labeled.len() as f64;
    let log_prior: Vec<f64> = class_counts
        .iter()
        .map(|&c| (c as f64 / n).ln())
        .collect();
    let mut log_on = Mat::zeros(p, dim);
    let mut log_off = Mat::zeros(p, dim);
    for c in 0..p {
        let denom = class_counts[c] as f64 + 2.0 * SMOOTHING;
        for m in 0..dim {
            let theta = (on_counts.at(c, m) + SMOOTHING) / denom;
            log_on.set(c, m, theta.ln());
            log_off.set(c, m, (1.0 - theta).ln());
        }
    }

    Ok(NaiveBayes {
        p,
        dim,
        log_prior,
        log_on,
        log_off,
    })
}

impl NaiveBayes {
    /// Number of classes.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Expected feature count.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unnormalized log-posterior `log P(class) + Σ_m log P(bit_m | class)`
    /// for every class.
    pub fn log_posterior(&self, y: &Sample) -> Result<Vec<f64>> {
        if y.dim() != self.dim {
            return Err(Error::Dimension {
                left: self.dim,
                right: y.dim(),
            });
        }
        let mut out = Vec::with_capacity(self.p);
        for c in 0..self.p {
            let on = self.log_on.row(c);
            let off = self.log_off.row(c);
            let mut lp = self.log_prior[c];
            for (m, &v) in y.features().iter().enumerate() {
                lp += if v > BINARIZE_THRESHOLD { on[m] } else { off[m] };
            }
            out.push(lp);
        }
        Ok(out)
    }

    /// Normalized posterior distribution over classes; sums to 1 up to float
    /// rounding.
    pub fn posterior(&self, y: &Sample) -> Result<Vec<f64>> {
        let lp = self.log_posterior(y)?;
        // Shift by the maximum before exponentiating so the largest term is
        // exactly 1 and nothing underflows to a 0/0.
        let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = lp.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(weights)
    }

    /// Most probable class; exact log-posterior ties resolve to the lowest
    /// class index.
    pub fn predict(&self, y: &Sample) -> Result<usize> {
        let lp = self.log_posterior(y)?;
        let mut best = 0;
        for (c, &v) in lp.iter().enumerate() {
            if v > lp[best] {
                best = c;
            }
        }
        Ok(best)
    }
}
