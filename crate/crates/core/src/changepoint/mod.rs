//! Confusion-based change point detection.
//!
//! A candidate boundary `tau` is scored by training a classifier to tell
//! documents before `tau` from documents after it; a genuine change in the
//! stream shows up as cross-validated accuracy above the majority-class null.
//! [`detect_segment`] scans daily boundaries and keeps the best one if it beats
//! a permutation threshold; [`detect_tree`] applies it recursively.
//! [`baseline_kernel_cpd`] is the kernel-cost baseline used in the
//! robustness experiments.

mod bayes;
mod dataset;
mod forest;
mod kernel;
mod tree;
mod trial;

use serde::{Deserialize, Serialize};

pub use kernel::{baseline_kernel_cpd, kernel_cpd, KernelConfig, KernelCpd, KernelInput};
pub use tree::{detect_tree, SegmentNode, SegmentTree, TreeConfig};
pub use trial::{candidate_taus, detect_segment, scan_segment, score_trial, Detection, Scan};

use crate::corpus::{day_floor, Document, FeatureVector, Timestamp, Vocabulary, SECONDS_PER_DAY};

/// A featurized document.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub timestamp: Timestamp,
    pub features: FeatureVector,
}

pub fn featurize(docs: &[Document], vocab: &Vocabulary) -> Vec<Observation> {
    docs.iter()
        .map(|d| Observation {
            timestamp: d.timestamp,
            features: crate::corpus::tfidf_transform(d, vocab),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    RandomForest,
    NaiveBayes,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random_forest" => Ok(Backend::RandomForest),
            "naive_bayes" => Ok(Backend::NaiveBayes),
            other => Err(format!("unknown backend `{other}`")),
        }
    }
}

/// How cross-validated predictions turn into an accuracy and its null.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyMetric {
    /// Fraction correct against the majority-class fraction.
    #[default]
    Raw,
    /// Mean per-class recall against 0.5.
    Balanced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub backend: Backend,
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means `ceil(sqrt(dim))`.
    pub max_features: Option<usize>,
    pub cv_folds: usize,
    pub seed: u64,
    /// Segments with more documents are sub-sampled per trial.
    pub max_docs: usize,
    pub metric: AccuracyMetric,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            backend: Backend::RandomForest,
            n_trees: 100,
            max_depth: 16,
            max_features: None,
            cv_folds: 5,
            seed: 0,
            max_docs: 20_000,
            metric: AccuracyMetric::Raw,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.n_trees == 0 {
            return Err(crate::Error::Config("n_trees must be at least 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(crate::Error::Config("cv_folds must be at least 2".into()));
        }
        if self.max_depth == 0 {
            return Err(crate::Error::Config("max_depth must be at least 1".into()));
        }
        if self.max_docs < 2 * self.cv_folds {
            return Err(crate::Error::Config("max_docs too small for cross-validation".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub tau: Timestamp,
    pub accuracy: f64,
    pub null_accuracy: f64,
    pub gain: f64,
}

/// Rule deciding whether the best gain in a segment is a real change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum SignificanceConfig {
    /// Shuffle timestamps `rounds` times; the threshold is the `quantile` of
    /// the best gain found on shuffled data.
    Permutation { rounds: usize, quantile: f64 },
    /// Accept gains strictly above a fixed value.
    Threshold { gain: f64 },
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        SignificanceConfig::Permutation {
            rounds: 20,
            quantile: 0.95,
        }
    }
}

/// Half-open, day-aligned time interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Segment {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        Self { start, end }
    }

    /// Smallest day-aligned segment covering every observation.
    pub fn covering(data: &[Observation]) -> Option<Segment> {
        let lo = data.iter().map(|o| o.timestamp).min()?;
        let hi = data.iter().map(|o| o.timestamp).max()?;
        Some(Segment::new(day_floor(lo), day_floor(hi) + SECONDS_PER_DAY))
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).div_euclid(SECONDS_PER_DAY)
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start <= ts && ts < self.end
    }
}

/// splitmix64 finalizer, used to derive independent sub-seeds.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
