//! Random forest of Gini-split binary trees over sparse non-negative features.
//!
//! Bootstrap rows, `max_features` candidate features per split drawn among the
//! features that are not constant in the node, best threshold by weighted Gini
//! impurity. Leaves store the class-1 fraction; the forest averages them.

use rand::seq::SliceRandom;
use rand::Rng;

use super::dataset::Rows;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: usize,
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(f64),
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

#[derive(Clone, Debug)]
pub(crate) struct Forest {
    trees: Vec<Tree>,
}

/// A unique row with its (class 0, class 1) sample weights.
type Item = (u32, [f64; 2]);

impl Forest {
    /// `samples` are `(row, class)` pairs; rows may repeat.
    pub fn fit<R: Rng>(rows: &Rows, samples: &[(u32, u8)], params: ForestParams, rng: &mut R) -> Self {
        let mut weights = vec![[0.0f64; 2]; rows.len()];
        let trees = (0..params.n_trees)
            .map(|_| {
                for w in weights.iter_mut() {
                    *w = [0.0; 2];
                }
                for _ in 0..samples.len() {
                    let (r, c) = samples[rng.gen_range(0..samples.len())];
                    weights[r as usize][c as usize] += 1.0;
                }
                let items: Vec<Item> = weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| w[0] + w[1] > 0.0)
                    .map(|(r, w)| (r as u32, *w))
                    .collect();
                let mut builder = TreeBuilder {
                    rows,
                    params,
                    nodes: Vec::new(),
                };
                builder.grow(items, 0, rng);
                Tree {
                    nodes: builder.nodes,
                }
            })
            .collect();
        Forest { trees }
    }

    /// Mean class-1 probability over trees.
    pub fn predict_proba(&self, rows: &Rows, r: u32) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(rows, r)).sum();
        sum / self.trees.len().max(1) as f64
    }
}

impl Tree {
    fn predict(&self, rows: &Rows, r: u32) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf(p) => return *p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if rows.get(r, *feature) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

struct TreeBuilder<'a> {
    rows: &'a Rows,
    params: ForestParams,
    nodes: Vec<Node>,
}

struct Split {
    feature: u32,
    threshold: f64,
    score: f64,
}

fn purity_score(w: [f64; 2]) -> f64 {
    let t = w[0] + w[1];
    if t > 0.0 {
        (w[0] * w[0] + w[1] * w[1]) / t
    } else {
        0.0
    }
}

impl TreeBuilder<'_> {
    fn grow<R: Rng>(&mut self, items: Vec<Item>, depth: usize, rng: &mut R) -> u32 {
        let id = self.nodes.len() as u32;
        let total = items.iter().fold([0.0; 2], |acc, (_, w)| [acc[0] + w[0], acc[1] + w[1]]);
        let weight = total[0] + total[1];
        let leaf = Node::Leaf(total[1] / weight);
        self.nodes.push(leaf);

        if depth >= self.params.max_depth || weight < 2.0 || total[0] == 0.0 || total[1] == 0.0 || items.len() < 2 {
            return id;
        }
        let Some(split) = self.best_split(&items, total, rng) else {
            return id;
        };
        if split.score - purity_score(total) <= 1e-12 * weight {
            return id;
        }
        let (left, right): (Vec<Item>, Vec<Item>) = items
            .into_iter()
            .partition(|(r, _)| self.rows.get(*r, split.feature) <= split.threshold);
        debug_assert!(!left.is_empty() && !right.is_empty());
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id as usize] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split<R: Rng>(&self, items: &[Item], total: [f64; 2], rng: &mut R) -> Option<Split> {
        // (feature, value, item) for every stored nonzero in the node
        let mut entries: Vec<(u32, f64, u32)> = Vec::new();
        for (k, (r, _)) in items.iter().enumerate() {
            let (idx, val) = self.rows.row(*r);
            entries.extend(idx.iter().zip(val).map(|(&f, &v)| (f, v, k as u32)));
        }
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut candidates: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        while start < entries.len() {
            let f = entries[start].0;
            let mut end = start;
            while end < entries.len() && entries[end].0 == f {
                end += 1;
            }
            let has_zero = end - start < items.len();
            let varies = entries[start].1 != entries[end - 1].1;
            if has_zero || varies {
                candidates.push((start, end));
            }
            start = end;
        }
        if candidates.is_empty() {
            return None;
        }
        let take = self.params.max_features.min(candidates.len());
        let (chosen, _) = candidates.partial_shuffle(rng, take);

        let mut best: Option<Split> = None;
        for &(s, e) in chosen.iter() {
            if let Some(split) = self.eval_feature(&entries[s..e], items, total) {
                if best.as_ref().is_none_or(|b| split.score > b.score) {
                    best = Some(split);
                }
            }
        }
        best
    }

    fn eval_feature(&self, group: &[(u32, f64, u32)], items: &[Item], total: [f64; 2]) -> Option<Split> {
        let mut nonzero = [0.0; 2];
        for &(_, _, k) in group {
            let w = items[k as usize].1;
            nonzero[0] += w[0];
            nonzero[1] += w[1];
        }
        let mut left = [total[0] - nonzero[0], total[1] - nonzero[1]];
        let has_zero = group.len() < items.len();
        let mut prev_value = 0.0;
        let mut best: Option<Split> = None;
        let consider = |left: [f64; 2], lo: f64, hi: f64, best: &mut Option<Split>| {
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = purity_score(left) + purity_score(right);
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mid = 0.5 * (lo + hi);
                let threshold = if mid < hi { mid } else { lo };
                *best = Some(Split {
                    feature: group[0].0,
                    threshold,
                    score,
                });
            }
        };

        let mut i = 0;
        let mut first = true;
        while i < group.len() {
            let v = group[i].1;
            if !first || has_zero {
                consider(left, prev_value, v, &mut best);
            }
            while i < group.len() && group[i].1 == v {
                let w = items[group[i].2 as usize].1;
                left[0] += w[0];
                left[1] += w[1];
                i += 1;
            }
            prev_value = v;
            first = false;
        }
        best
    }
}
