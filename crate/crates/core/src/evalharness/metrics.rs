//! Clustering quality measures.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragments::cosine;

/// Mean cosine similarity over all unordered pairs; a singleton scores 1.
pub fn coherence(vectors: &[&[f64]]) -> Result<f64> {
    match vectors.len() {
        0 => Err(Error::Invalid("coherence of an empty cluster".into())),
        1 => Ok(1.0),
        n => {
            let mut sum = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    sum += cosine(vectors[i], vectors[j]);
                }
            }
            Ok(sum / (n * (n - 1) / 2) as f64)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Pair counting: precision is the share of same-cluster pairs that share a
/// truth label, recall the share of same-truth pairs that share a cluster.
/// With no pairs on one side the corresponding value is 1.
pub fn relative_pr<T: Eq + Hash, C: Eq + Hash>(truth: &[T], predicted: &[C]) -> Result<PrecisionRecall> {
    if truth.len() != predicted.len() {
        return Err(Error::Invalid(format!(
            "{} truth labels for {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut by_truth: HashMap<&T, u64> = HashMap::new();
    let mut by_cluster: HashMap<&C, u64> = HashMap::new();
    let mut by_both: HashMap<(&T, &C), u64> = HashMap::new();
    for (t, c) in truth.iter().zip(predicted) {
        *by_truth.entry(t).or_default() += 1;
        *by_cluster.entry(c).or_default() += 1;
        *by_both.entry((t, c)).or_default() += 1;
    }
    let both: u64 = by_both.values().map(|&n| pairs(n)).sum();
    let same_truth: u64 = by_truth.values().map(|&n| pairs(n)).sum();
    let same_cluster: u64 = by_cluster.values().map(|&n| pairs(n)).sum();
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(PrecisionRecall {
        precision: ratio(both, same_cluster),
        recall: ratio(both, same_truth),
    })
}

/// Mutual-mode matching. An event is matched when its modal cluster has the
/// event as its own modal label. Precision divides matches by the number of
/// distinct modal clusters, recall by the number of events. Ties go to the
/// smaller cluster id and the smaller truth label. No events at all is
/// vacuously perfect.
pub fn absolute_match<T: Ord + Clone>(truth: &[T], predicted: &[usize], events: &[T]) -> Result<PrecisionRecall> {
    if truth.len() != predicted.len() {
        return Err(Error::Invalid(format!(
            "{} truth labels for {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if events.is_empty() {
        return Ok(PrecisionRecall {
            precision: 1.0,
            recall: 1.0,
        });
    }
    let mut table: BTreeMap<(&T, usize), u64> = BTreeMap::new();
    for (t, &c) in truth.iter().zip(predicted) {
        *table.entry((t, c)).or_default() += 1;
    }
    // modal label of each cluster
    let mut cluster_mode: BTreeMap<usize, (&T, u64)> = BTreeMap::new();
    for (&(t, c), &n) in &table {
        let e = cluster_mode.entry(c).or_insert((t, n));
        if n > e.1 || (n == e.1 && t < e.0) {
            *e = (t, n);
        }
    }
    let mut modal_clusters = std::collections::BTreeSet::new();
    let mut matched = 0;
    for ev in events {
        let mode = table
            .range((ev, 0)..=(ev, usize::MAX))
            .fold(None, |best: Option<(usize, u64)>, (&(_, c), &n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((c, n)),
            });
        let Some((c, _)) = mode else { continue };
        modal_clusters.insert(c);
        if cluster_mode[&c].0 == ev {
            matched += 1;
        }
    }
    Ok(PrecisionRecall {
        precision: if modal_clusters.is_empty() {
            0.0
        } else {
            matched as f64 / modal_clusters.len() as f64
        },
        recall: matched as f64 / events.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_conventions() {
        let truth = ["a", "a", "b"];
        let pr = relative_pr(&truth, &[0, 1, 2]).unwrap();
        assert_eq!((pr.precision, pr.recall), (1.0, 0.0));
        let pr = relative_pr(&truth, &[0, 0, 0]).unwrap();
        assert!((pr.precision - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(pr.recall, 1.0);
    }

    #[test]
    fn absolute_one_big_cluster() {
        let events: Vec<u32> = (0..22).collect();
        let mut truth = Vec::new();
        for e in &events {
            for _ in 0..(if *e == 7 { 12 } else { 9 }) {
                truth.push(*e);
            }
        }
        let pred = vec![0; truth.len()];
        let pr = absolute_match(&truth, &pred, &events).unwrap();
        assert!((pr.recall - 1.0 / 22.0).abs() < 1e-12);
        assert_eq!(pr.precision, 1.0);
        let perfect: Vec<usize> = truth.iter().map(|&t| t as usize + 5).collect();
        let pr = absolute_match(&truth, &perfect, &events).unwrap();
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
    }

    #[test]
    fn coherence_bounds() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        assert_eq!(coherence(&[&a]).unwrap(), 1.0);
        assert_eq!(coherence(&[&a, &b]).unwrap(), 0.0);
        assert!(coherence(&[]).is_err());
    }
}
