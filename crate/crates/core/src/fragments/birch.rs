//! BIRCH clustering feature tree.
//!
//! Points are inserted one at a time in input order. Each descends to the
//! closest leaf entry (by centroid distance) and is absorbed when the merged
//! radius stays within the threshold; otherwise it opens a new entry. Nodes
//! holding more than `branching` entries split around their two most distant
//! entries. The leaf entries are the final clusters; there is no global
//! refinement pass.

use serde::{Deserialize, Serialize};

/// Clustering feature `(N, LS, SS)` of a set of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cf {
    pub n: f64,
    pub ls: Vec<f64>,
    pub ss: f64,
}

impl Cf {
    pub fn point(x: &[f64], weight: f64) -> Self {
        Self {
            n: weight,
            ls: x.iter().map(|v| v * weight).collect(),
            ss: weight * x.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    pub fn merge(&mut self, other: &Cf) {
        self.n += other.n;
        for (a, b) in self.ls.iter_mut().zip(&other.ls) {
            *a += b;
        }
        self.ss += other.ss;
    }

    pub fn merged(&self, other: &Cf) -> Cf {
        let mut m = self.clone();
        m.merge(other);
        m
    }

    pub fn centroid(&self) -> Vec<f64> {
        self.ls.iter().map(|v| v / self.n).collect()
    }

    /// `sqrt(SS/N - |LS/N|^2)`, the root mean squared distance to the centroid.
    pub fn radius(&self) -> f64 {
        let c2: f64 = self.ls.iter().map(|v| (v / self.n) * (v / self.n)).sum();
        (self.ss / self.n - c2).max(0.0).sqrt()
    }

    fn centroid_dist2(&self, other: &Cf) -> f64 {
        self.ls
            .iter()
            .zip(&other.ls)
            .map(|(a, b)| {
                let d = a / self.n - b / other.n;
                d * d
            })
            .sum()
    }
}

#[derive(Clone, Debug)]
struct Entry {
    cf: Cf,
    /// Child node for inner entries, subcluster id for leaf entries.
    child: usize,
}

#[derive(Clone, Debug)]
struct Node {
    leaf: bool,
    entries: Vec<Entry>,
}

#[derive(Clone, Debug)]
pub struct CfTree {
    threshold: f64,
    branching: usize,
    nodes: Vec<Node>,
    root: usize,
    /// Subcluster CFs, indexed by subcluster id; mirrors the leaf entries.
    subclusters: Vec<Cf>,
}

impl CfTree {
    pub fn new(threshold: f64, branching: usize) -> Self {
        assert!(threshold > 0.0, "threshold must be positive");
        assert!(branching >= 2, "branching factor must be at least 2");
        Self {
            threshold,
            branching,
            nodes: vec![Node {
                leaf: true,
                entries: Vec::new(),
            }],
            root: 0,
            subclusters: Vec::new(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    /// Leaf subclusters in creation order.
    pub fn subclusters(&self) -> &[Cf] {
        &self.subclusters
    }

    /// Inserts `x` with multiplicity `weight`; returns the subcluster that
    /// absorbed it.
    pub fn insert(&mut self, x: &[f64], weight: f64) -> usize {
        let cf = Cf::point(x, weight);
        let (id, split) = self.insert_at(self.root, &cf);
        if let Some((a, b)) = split {
            self.root = self.nodes.len();
            self.nodes.push(Node {
                leaf: false,
                entries: vec![a, b],
            });
        }
        id
    }

    fn insert_at(&mut self, node: usize, cf: &Cf) -> (usize, Option<(Entry, Entry)>) {
        let closest = self.nodes[node]
            .entries
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.cf.centroid_dist2(cf).total_cmp(&b.cf.centroid_dist2(cf)))
            .map(|(i, _)| i);

        if self.nodes[node].leaf {
            if let Some(i) = closest {
                let merged = self.nodes[node].entries[i].cf.merged(cf);
                if merged.radius() <= self.threshold {
                    let sub = self.nodes[node].entries[i].child;
                    self.nodes[node].entries[i].cf = merged.clone();
                    self.subclusters[sub] = merged;
                    return (sub, None);
                }
            }
            let sub = self.subclusters.len();
            self.subclusters.push(cf.clone());
            self.nodes[node].entries.push(Entry { cf: cf.clone(), child: sub });
            return (sub, self.split_if_needed(node));
        }

        let i = closest.expect("inner nodes are never empty");
        let child = self.nodes[node].entries[i].child;
        let (sub, split) = self.insert_at(child, cf);
        match split {
            None => {
                self.nodes[node].entries[i].cf.merge(cf);
                (sub, None)
            }
            Some((a, b)) => {
                self.nodes[node].entries[i] = a;
                self.nodes[node].entries.push(b);
                (sub, self.split_if_needed(node))
            }
        }
    }

    /// Splits an overfull node in place; returns entries for the two halves,
    /// the first pointing at `node` itself.
    fn split_if_needed(&mut self, node: usize) -> Option<(Entry, Entry)> {
        if self.nodes[node].entries.len() <= self.branching {
            return None;
        }
        let entries = std::mem::take(&mut self.nodes[node].entries);
        let mut far = (0, 1, f64::NEG_INFINITY);
        for i in 0..entries.len() {
            for j in i + 1..entries.len() {
                let d = entries[i].cf.centroid_dist2(&entries[j].cf);
                if d > far.2 {
                    far = (i, j, d);
                }
            }
        }
        let (si, sj) = (far.0, far.1);
        let seed_l = entries[si].cf.clone();
        let seed_r = entries[sj].cf.clone();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (k, e) in entries.into_iter().enumerate() {
            let to_left = if k == si {
                true
            } else if k == sj {
                false
            } else {
                e.cf.centroid_dist2(&seed_l) <= e.cf.centroid_dist2(&seed_r)
            };
            if to_left {
                left.push(e);
            } else {
                right.push(e);
            }
        }
        let leaf = self.nodes[node].leaf;
        let left_cf = total(&left);
        let right_cf = total(&right);
        self.nodes[node].entries = left;
        let new = self.nodes.len();
        self.nodes.push(Node { leaf, entries: right });
        Some((
            Entry {
                cf: left_cf,
                child: node,
            },
            Entry {
                cf: right_cf,
                child: new,
            },
        ))
    }

    /// Checks CF additivity and the leaf radius bound; used by tests.
    pub fn check(&self) -> Result<(), String> {
        self.check_node(self.root).map(|_| ())
    }

    fn check_node(&self, node: usize) -> Result<Cf, String> {
        let n = &self.nodes[node];
        if n.entries.is_empty() && node != self.root {
            return Err(format!("node {node} is empty"));
        }
        if n.entries.len() > self.branching {
            return Err(format!("node {node} holds {} entries", n.entries.len()));
        }
        for e in &n.entries {
            if n.leaf {
                if e.cf.radius() > self.threshold + 1e-9 {
                    return Err(format!("leaf entry radius {} exceeds {}", e.cf.radius(), self.threshold));
                }
                if self.subclusters[e.child] != e.cf {
                    return Err("subcluster table out of sync".into());
                }
            } else {
                let below = self.check_node(e.child)?;
                if (below.n - e.cf.n).abs() > 1e-6
                    || (below.ss - e.cf.ss).abs() > 1e-6 * (1.0 + below.ss.abs())
                    || below.ls.iter().zip(&e.cf.ls).any(|(a, b)| (a - b).abs() > 1e-6 * (1.0 + a.abs()))
                {
                    return Err(format!("entry CF does not match child {}", e.child));
                }
            }
        }
        Ok(total(&n.entries))
    }
}

fn total(entries: &[Entry]) -> Cf {
    let mut it = entries.iter();
    let mut acc = it.next().map(|e| e.cf.clone()).unwrap_or(Cf {
        n: 0.0,
        ls: Vec::new(),
        ss: 0.0,
    });
    for e in it {
        acc.merge(&e.cf);
    }
    acc
}

/// Result of fitting a CF tree: one label per input point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirchFit {
    pub threshold: f64,
    pub branching: usize,
    /// Cluster label per input point, renumbered by first appearance.
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    pub radii: Vec<f64>,
}

/// Builds a CF tree over `points` (with optional multiplicities) and assigns
/// every point to its nearest leaf subcluster centroid.
pub fn birch_fit(points: &[Vec<f64>], weights: Option<&[f64]>, threshold: f64, branching: usize) -> BirchFit {
    let mut tree = CfTree::new(threshold, branching);
    for (i, p) in points.iter().enumerate() {
        tree.insert(p, weights.map_or(1.0, |w| w[i]));
    }
    let centroids: Vec<Vec<f64>> = tree.subclusters().iter().map(Cf::centroid).collect();
    let nearest: Vec<usize> = points
        .iter()
        .map(|p| {
            centroids
                .iter()
                .enumerate()
                .map(|(k, c)| (k, c.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k)
                .expect("at least one subcluster")
        })
        .collect();
    let mut renumber = vec![usize::MAX; centroids.len()];
    let mut next = 0;
    let labels = nearest
        .iter()
        .map(|&k| {
            if renumber[k] == usize::MAX {
                renumber[k] = next;
                next += 1;
            }
            renumber[k]
        })
        .collect();
    let mut radii = vec![0.0; next];
    for (k, cf) in tree.subclusters().iter().enumerate() {
        if renumber[k] != usize::MAX {
            radii[renumber[k]] = cf.radius();
        }
    }
    BirchFit {
        threshold,
        branching,
        labels,
        n_clusters: next,
        radii,
    }
}
