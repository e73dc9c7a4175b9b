//! Dataset ingestion and splitting.
//!
//! Two input formats are supported: the MNIST IDX binary format (with
//! transparent gzip decompression) and a generic CSV layout for
//! pre-featurized data. Both normalize features into `[0,1]` and validate
//! the domain on load. [`stratified_split`] carves a dataset into the
//! labeled / unlabeled / test partitions the algorithms consume, hiding
//! the unlabeled partition's true labels behind an id-keyed side table so
//! algorithm code cannot accidentally peek at them.

mod csv;
mod idx;
mod split;

pub use csv::{load_csv, write_csv};
pub use idx::load_idx;
pub use split::{stratified_split, Split};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qkernel::{Sample, SampleId};

/// An immutable collection of same-dimensional samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    samples: Vec<Sample>,
    m: usize,
    p: usize,
}

impl Dataset {
    /// Validates dimensional consistency and derives P (= max label + 1,
    /// or 0 for fully unlabeled data).
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("dataset contains no samples".into()));
        }
        let m = samples[0].dim();
        for s in &samples {
            if s.dim() != m {
                return Err(Error::Dimension {
                    left: m,
                    right: s.dim(),
                });
            }
        }
        let p = samples
            .iter()
            .filter_map(|s| s.label())
            .max()
            .map_or(0, |max| max + 1);
        Ok(Dataset {
            name: name.into(),
            samples,
            m,
            p,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature dimensionality M.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of classes P (max label + 1; 0 when no sample is labeled).
    pub fn p(&self) -> usize {
        self.p
    }

    /// Shifts every sample id by `base`.
    ///
    /// Sample ids are load-order indices; when two datasets (e.g. train
    /// and test files) are used together, one must be re-based so ids stay
    /// globally unique — the conservation checks in the semi-supervised
    /// engine compare id multisets.
    pub fn offset_ids(&mut self, base: u64) {
        for s in &mut self.samples {
            let relabeled = Sample::new(
                SampleId(s.id().0 + base),
                s.features().to_vec(),
                s.label(),
            )
            .expect("re-based sample re-validates");
            *s = relabeled;
        }
    }

    /// Map from sample id to true label, for every labeled sample.
    pub fn label_table(&self) -> BTreeMap<SampleId, usize> {
        self.samples
            .iter()
            .filter_map(|s| s.label().map(|l| (s.id(), l)))
            .collect()
    }
}

/// How many samples to take: a fixed count or everything available.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountSpec {
    All,
    Exactly(usize),
}

impl CountSpec {
    fn resolve(&self, available: usize, what: &str) -> Result<usize> {
        match *self {
            CountSpec::All => Ok(available),
            CountSpec::Exactly(n) if n <= available => Ok(n),
            CountSpec::Exactly(n) => Err(Error::Config(format!(
                "{what}: requested {n} samples but only {available} are available"
            ))),
        }
    }
}

impl Serialize for CountSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CountSpec::All => serializer.serialize_str("all"),
            CountSpec::Exactly(n) => serializer.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for CountSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(n) => Ok(CountSpec::Exactly(n as usize)),
            Raw::Text(s) if s == "all" => Ok(CountSpec::All),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a count or \"all\", got \"{s}\""
            ))),
        }
    }
}

impl std::str::FromStr for CountSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            Ok(CountSpec::All)
        } else {
            s.parse::<usize>()
                .map(CountSpec::Exactly)
                .map_err(|_| format!("expected a non-negative integer or \"all\", got \"{s}\""))
        }
    }
}

/// Partitioning request for [`stratified_split`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Labeled samples drawn per class (N). 0 = unsupervised mode.
    pub labels_per_class: usize,
    /// Unlabeled pool size drawn from the remaining training samples.
    pub unlabeled_count: CountSpec,
    /// Test subset size (stratified across classes).
    pub test_count: CountSpec,
    /// Seed for all partition draws.
    pub rng_seed: u64,
}
