use serde::{Deserialize, Serialize};

/// Sparse non-negative feature vector with strictly increasing indices and
/// no stored zeros.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Builds a vector from unordered `(index, weight)` pairs. Duplicate
    /// indices are summed and zeros dropped.
    ///
    /// Panics if an index is out of range or a weight is negative or not finite.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_unstable_by_key(|p| p.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            assert!((i as usize) < dim, "index {i} out of range for dimension {dim}");
            assert!(w.is_finite() && w >= 0.0, "invalid weight {w}");
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => entries.push((i, w)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut acc = 0.0;
        while let (Some(x), Some(y)) = (a.peek(), b.peek()) {
            match x.0.cmp(&y.0) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    acc += x.1 * y.1;
                    a.next();
                    b.next();
                }
            }
        }
        acc
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for e in &mut self.entries {
                e.1 /= n;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            out[i as usize] = w;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_sorts_merges_and_drops_zeros() {
        let v = FeatureVector::from_pairs(5, vec![(3, 1.0), (1, 0.0), (3, 2.0), (0, 0.5)]);
        assert_eq!(v.entries(), &[(0, 0.5), (3, 3.0)]);
        assert_eq!(v.get(3), 3.0);
        assert_eq!(v.get(1), 0.0);
    }

    #[test]
    fn dot_matches_dense() {
        let a = FeatureVector::from_pairs(6, vec![(0, 1.0), (2, 2.0), (5, 3.0)]);
        let b = FeatureVector::from_pairs(6, vec![(2, 4.0), (3, 1.0), (5, 1.0)]);
        let dense: f64 = a.to_dense().iter().zip(b.to_dense()).map(|(x, y)| x * y).sum();
        assert_eq!(a.dot(&b), dense);
    }

    #[test]
    #[should_panic]
    fn rejects_out_of_range() {
        FeatureVector::from_pairs(2, vec![(2, 1.0)]);
    }
}
