//! Seeded stratified partitioning into labeled / unlabeled / test sets.
//!
//! All randomness flows from a single [`ChaCha8Rng`] seeded with
//! `SplitSpec::rng_seed`, and draws happen in a pinned order (labeled
//! samples class by class, then the unlabeled pool, then the test set),
//! so a seed fully determines the partition.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CountSpec, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::qkernel::{Sample, SampleId};

/// A partition of the input data into the three roles used by the
/// classifiers. True labels of the unlabeled pool are stripped from the
/// samples themselves and kept in a side table keyed by sample id, so
/// algorithm code cannot read them by accident while evaluation code
/// still can.
#[derive(Debug, Clone)]
pub struct Split {
    /// Labeled training samples, `labels_per_class` per class, grouped by
    /// class in ascending class order.
    pub labeled: Vec<Sample>,
    /// Unlabeled pool samples with `label == None`.
    pub unlabeled: Vec<Sample>,
    /// Held-out evaluation samples with labels intact.
    pub test: Vec<Sample>,
    /// True labels of the unlabeled pool, for evaluation only.
    pub ground_truth: BTreeMap<SampleId, usize>,
}

/// Groups dataset indices by class, insisting that every sample carries a
/// label (stratification is meaningless otherwise).
fn indices_by_class(ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    let mut by_class = vec![Vec::new(); ds.p()];
    for (i, s) in ds.samples().iter().enumerate() {
        match s.label() {
            Some(l) => by_class[l].push(i),
            None => {
                return Err(Error::Config(format!(
                    "dataset \"{}\": sample {} has no label; stratified splitting needs fully labeled data",
                    ds.name(),
                    s.id()
                )))
            }
        }
    }
    Ok(by_class)
}

/// Draws `count` entries from `from` without replacement and returns them
/// in ascending order, so the draw is a set, not a sequence.
fn draw_sorted(rng: &mut ChaCha8Rng, from: &[usize], count: usize) -> Vec<usize> {
    let mut picks: Vec<usize> = rand::seq::index::sample(rng, from.len(), count)
        .into_iter()
        .map(|k| from[k])
        .collect();
    picks.sort_unstable();
    picks
}

/// Draws a class-balanced subset of `total` indices: each class gets
/// `total / P`, and the `total mod P` leftovers go to the lowest class
/// indices. The result is sorted ascending.
fn stratified_draw(
    rng: &mut ChaCha8Rng,
    by_class: &[Vec<usize>],
    total: usize,
    what: &str,
) -> Result<Vec<usize>> {
    let p = by_class.len();
    let base = total / p;
    let rem = total % p;
    let mut picked = Vec::with_capacity(total);
    for (c, members) in by_class.iter().enumerate() {
        let want = base + usize::from(c < rem);
        if members.len() < want {
            return Err(Error::Config(format!(
                "{what}: class {c} has {} samples available, need {want}",
                members.len()
            )));
        }
        picked.extend(draw_sorted(rng, members, want));
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Partitions `train` (and optionally a dedicated `test_source`) per
/// `spec`.
///
/// Labeled samples are drawn first, `labels_per_class` from each class
/// without replacement; the unlabeled pool comes from the remainder with
/// labels stripped. The test set is drawn class-balanced from
/// `test_source` when one is given (the usual case for MNIST, which ships
/// separate test files), otherwise from whatever training data neither
/// earlier draw touched. The three partitions are always disjoint.
pub fn stratified_split(
    train: &Dataset,
    test_source: Option<&Dataset>,
    spec: &SplitSpec,
) -> Result<Split> {
    if train.p() == 0 {
        return Err(Error::Config(format!(
            "dataset \"{}\" has no labels; stratified splitting needs labeled data",
            train.name()
        )));
    }
    let by_class = indices_by_class(train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    // Labeled partition: N per class, classes in ascending order.
    let n = spec.labels_per_class;
    let mut used = vec![false; train.len()];
    let mut labeled = Vec::with_capacity(n * train.p());
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < n {
            return Err(Error::Config(format!(
                "class {c} has only {} training samples, need labels_per_class = {n}",
                members.len()
            )));
        }
        for i in draw_sorted(&mut rng, members, n) {
            used[i] = true;
            labeled.push(train.samples()[i].clone());
        }
    }

    // Unlabeled pool from the remainder, labels moved to the side table.
    let remainder: Vec<usize> = (0..train.len()).filter(|&i| !used[i]).collect();
    let pool_count = spec
        .unlabeled_count
        .resolve(remainder.len(), "unlabeled pool")?;
    let mut ground_truth = BTreeMap::new();
    let mut unlabeled = Vec::with_capacity(pool_count);
    for i in draw_sorted(&mut rng, &remainder, pool_count) {
        used[i] = true;
        let s = &train.samples()[i];
        ground_truth.insert(s.id(), s.label().expect("labels checked above"));
        unlabeled.push(s.clone().without_label());
    }

    // Test set: dedicated source when given, training leftovers otherwise.
    let test = match test_source {
        Some(ts) => {
            let test_by_class = indices_by_class(ts)?;
            draw_test(&mut rng, ts, &test_by_class, &spec.test_count)?
        }
        None => {
            let leftover_by_class: Vec<Vec<usize>> = by_class
                .iter()
                .map(|members| members.iter().copied().filter(|&i| !used[i]).collect())
                .collect();
            draw_test(&mut rng, train, &leftover_by_class, &spec.test_count)?
        }
    };

    Ok(Split {
        labeled,
        unlabeled,
        test,
        ground_truth,
    })
}

fn draw_test(
    rng: &mut ChaCha8Rng,
    ds: &Dataset,
    by_class: &[Vec<usize>],
    count: &CountSpec,
) -> Result<Vec<Sample>> {
    let indices = match count {
        CountSpec::All => {
            let mut all: Vec<usize> = by_class.concat();
            all.sort_unstable();
            all
        }
        CountSpec::Exactly(k) => stratified_draw(rng, by_class, *k, "test set")?,
    };
    Ok(indices.into_iter().map(|i| ds.samples()[i].clone()).collect())
}
