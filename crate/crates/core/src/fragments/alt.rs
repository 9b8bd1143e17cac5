//! K-means and DBSCAN, kept for comparison against BIRCH in the evaluation
//! harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AltMethod {
    Kmeans { k: usize, seed: u64, max_iter: usize },
    Dbscan { eps: f64, min_pts: usize },
}

/// Label given to DBSCAN noise points.
pub const NOISE: Option<usize> = None;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Labels per point; `None` marks DBSCAN noise. K-means never emits `None`.
pub fn alt_cluster(points: &[Vec<f64>], method: &AltMethod) -> Result<Vec<Option<usize>>> {
    match *method {
        AltMethod::Kmeans { k, seed, max_iter } => {
            kmeans(points, k, seed, max_iter).map(|l| l.into_iter().map(Some).collect())
        }
        AltMethod::Dbscan { eps, min_pts } => dbscan(points, eps, min_pts),
    }
}

/// Lloyd iterations from a seeded k-means++ initialisation.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config("kmeans needs k >= 1".into()));
    }
    if k > points.len() {
        return Err(Error::Config(format!("kmeans k = {k} exceeds {} points", points.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a centre
            rng.gen_range(0..points.len())
        } else {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &centers[centers.len() - 1]));
        }
    }

    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b])))
                .expect("k >= 1");
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centre
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    Ok(labels)
}

/// Classic DBSCAN with brute-force neighbourhoods. A point is core when at
/// least `min_pts` points (itself included) lie within `eps`.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Result<Vec<Option<usize>>> {
    if !(eps > 0.0) {
        return Err(Error::Config("dbscan needs eps > 0".into()));
    }
    if min_pts == 0 {
        return Err(Error::Config("dbscan needs min_pts >= 1".into()));
    }
    let eps2 = eps * eps;
    let n = points.len();
    let neighbours = |i: usize| -> Vec<usize> { (0..n).filter(|&j| dist2(&points[i], &points[j]) <= eps2).collect() };
    let mut labels: Vec<Option<usize>> = vec![NOISE; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = neighbours(i);
        if nb.len() < min_pts {
            continue;
        }
        let c = next;
        next += 1;
        labels[i] = Some(c);
        let mut queue = nb;
        let mut q = 0;
        while q < queue.len() {
            let j = queue[q];
            q += 1;
            if labels[j].is_none() {
                labels[j] = Some(c);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nbj = neighbours(j);
            if nbj.len() >= min_pts {
                queue.extend(nbj);
            }
        }
    }
    Ok(labels)
}
