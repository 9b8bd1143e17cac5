//! Deduplicated CSR storage for classifier training.
//!
//! Tweets and synthetic posts repeat heavily, so identical feature vectors are
//! stored once and samples refer to their unique row. Training on weighted
//! unique rows is equivalent to training on the repeated rows.

use std::collections::HashMap;

use crate::corpus::FeatureVector;

#[derive(Clone, Debug, Default)]
pub(crate) struct Rows {
    pub dim: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl Rows {
    pub fn len(&self) -> usize {
        self.indptr.len().saturating_sub(1)
    }

    pub fn row(&self, r: u32) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[r as usize], self.indptr[r as usize + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: u32, feature: u32) -> f64 {
        let (idx, val) = self.row(r);
        match idx.binary_search(&feature) {
            Ok(p) => val[p],
            Err(_) => 0.0,
        }
    }
}

/// Unique rows plus, for every input vector, the id of its row.
pub(crate) fn dedup_rows<'a>(dim: usize, vectors: impl Iterator<Item = &'a FeatureVector>) -> (Rows, Vec<u32>) {
    let mut rows = Rows {
        dim,
        indptr: vec![0],
        ..Default::default()
    };
    let mut seen: HashMap<Vec<(u32, u64)>, u32> = HashMap::new();
    let mut ids = Vec::new();
    for v in vectors {
        let key: Vec<(u32, u64)> = v.entries().iter().map(|&(i, w)| (i, w.to_bits())).collect();
        let next = rows.len() as u32;
        let id = *seen.entry(key).or_insert_with(|| {
            for &(i, w) in v.entries() {
                rows.indices.push(i);
                rows.values.push(w);
            }
            rows.indptr.push(rows.indices.len());
            next
        });
        ids.push(id);
    }
    (rows, ids)
}
