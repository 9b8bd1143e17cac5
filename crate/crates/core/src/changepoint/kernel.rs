//! Single change point by kernel cost minimisation.
//!
//! For a split of the sample sequence into two blocks the cost is
//! `sum_blocks (sum_i k(x_i, x_i) - (1/n_b) sum_{i,j} k(x_i, x_j))` with a
//! Gaussian kernel `exp(-d^2 / (2 h^2))` whose bandwidth `h` is the median
//! pairwise distance. Samples are either daily mean vectors or the documents
//! themselves in time order; candidate splits are day boundaries in both cases.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Observation, Segment};
use crate::corpus::{day_floor, FeatureVector, Timestamp};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelInput {
    /// One sample per day: the mean feature vector of its documents.
    #[default]
    DailyMean,
    /// One sample per document.
    Documents,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub input: KernelInput,
    pub min_days: usize,
    /// Document input is thinned to at most this many evenly spaced samples.
    pub max_samples: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            input: KernelInput::DailyMean,
            min_days: 1,
            max_samples: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelCpd {
    pub tau: Timestamp,
    pub cost: f64,
    /// All candidate costs in time order.
    pub costs: Vec<(Timestamp, f64)>,
    /// Set when every candidate has the same cost.
    pub low_confidence: bool,
}

/// Kernel change point over daily mean vectors.
pub fn baseline_kernel_cpd(data: &[Observation], segment: Segment, min_days: usize) -> Result<KernelCpd> {
    kernel_cpd(
        data,
        segment,
        &KernelConfig {
            min_days,
            ..KernelConfig::default()
        },
    )
}

fn daily_means(data: &[&Observation]) -> Vec<(Timestamp, FeatureVector)> {
    let dim = data.first().map_or(0, |o| o.features.dim());
    let mut days: BTreeMap<Timestamp, (BTreeMap<u32, f64>, usize)> = BTreeMap::new();
    for o in data {
        let entry = days.entry(day_floor(o.timestamp)).or_default();
        for &(i, w) in o.features.entries() {
            *entry.0.entry(i).or_default() += w;
        }
        entry.1 += 1;
    }
    days.into_iter()
        .map(|(day, (sum, n))| {
            let pairs = sum.into_iter().map(|(i, w)| (i, w / n as f64)).collect();
            (day, FeatureVector::from_pairs(dim, pairs))
        })
        .collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let len = xs.len();
    let (lo, m, _) = xs.select_nth_unstable_by(len / 2, f64::total_cmp);
    let m = *m;
    if len % 2 == 1 {
        m
    } else {
        let below = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + m)
    }
}

pub fn kernel_cpd(data: &[Observation], segment: Segment, cfg: &KernelConfig) -> Result<KernelCpd> {
    let mut inside: Vec<&Observation> = data.iter().filter(|o| segment.contains(o.timestamp)).collect();
    inside.sort_by_key(|o| o.timestamp);
    let samples: Vec<(Timestamp, FeatureVector)> = match cfg.input {
        KernelInput::DailyMean => daily_means(&inside),
        KernelInput::Documents => {
            let n = inside.len();
            let keep = n.min(cfg.max_samples.max(2));
            (0..keep)
                .map(|i| inside[i * n / keep])
                .map(|o| (o.timestamp, o.features.clone()))
                .collect()
        }
    };
    let day_count = samples
        .iter()
        .map(|(t, _)| day_floor(*t))
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    if day_count < 2 {
        return Err(Error::SegmentTooSmall(format!(
            "kernel baseline needs at least 2 days with data, found {day_count}"
        )));
    }
    let min_days = cfg.min_days.max(1);
    if day_count < 2 * min_days {
        return Err(Error::SegmentTooSmall(format!(
            "{day_count} days with data, need {} for min_days = {min_days}",
            2 * min_days
        )));
    }

    let n = samples.len();
    let norms: Vec<f64> = samples.iter().map(|(_, v)| v.dot(v)).collect();
    let mut sq = vec![0.0; n * n];
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d2 = (norms[i] + norms[j] - 2.0 * samples[i].1.dot(&samples[j].1)).max(0.0);
            sq[i * n + j] = d2;
            sq[j * n + i] = d2;
            dists.push(d2.sqrt());
        }
    }
    let h = median(dists);
    let bandwidth = if h > 0.0 { h } else { 1.0 };
    // prefix[(i, j)] = sum of k over rows < i and columns < j
    let w = n + 1;
    let mut prefix = vec![0.0; w * w];
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += (-sq[i * n + j] / (2.0 * bandwidth * bandwidth)).exp();
            prefix[(i + 1) * w + j + 1] = prefix[i * w + j + 1] + row;
        }
    }
    drop(sq);
    let block_cost = |lo: usize, hi: usize| -> f64 {
        let s = prefix[hi * w + hi] - prefix[lo * w + hi] - prefix[hi * w + lo] + prefix[lo * w + lo];
        (hi - lo) as f64 - s / (hi - lo) as f64
    };

    // first sample index of each day
    let mut starts: Vec<(Timestamp, usize)> = Vec::new();
    for (i, (t, _)) in samples.iter().enumerate() {
        let d = day_floor(*t);
        if starts.last().is_none_or(|&(prev, _)| prev != d) {
            starts.push((d, i));
        }
    }
    let costs: Vec<(Timestamp, f64)> = (min_days..=starts.len() - min_days)
        .map(|k| {
            let (t, i) = starts[k];
            (t, block_cost(0, i) + block_cost(i, n))
        })
        .collect();
    let (tau, cost) = costs
        .iter()
        .copied()
        .fold(None, |best: Option<(Timestamp, f64)>, c| match best {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
        .expect("at least one candidate");
    let spread = costs.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max) - cost;
    Ok(KernelCpd {
        tau,
        cost,
        low_confidence: spread <= 1e-9 * (1.0 + cost.abs()),
        costs,
    })
}
