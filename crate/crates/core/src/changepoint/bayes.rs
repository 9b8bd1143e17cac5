//! Multinomial naive Bayes over non-negative feature weights (Laplace smoothing).

use super::dataset::Rows;

#[derive(Clone, Debug)]
pub(crate) struct NaiveBayes {
    log_prior: [f64; 2],
    log_prob: [Vec<f64>; 2],
}

impl NaiveBayes {
    pub fn fit(rows: &Rows, samples: &[(u32, u8)], alpha: f64) -> Self {
        let dim = rows.dim;
        let mut mass = [vec![0.0; dim], vec![0.0; dim]];
        let mut count = [0.0f64; 2];
        for &(r, c) in samples {
            count[c as usize] += 1.0;
            let (idx, val) = rows.row(r);
            for (&f, &v) in idx.iter().zip(val) {
                mass[c as usize][f as usize] += v;
            }
        }
        let n = count[0] + count[1];
        let log_prob = mass.map(|m| {
            let total: f64 = m.iter().sum::<f64>() + alpha * dim as f64;
            m.iter().map(|x| ((x + alpha) / total).ln()).collect()
        });
        let log_prior = count.map(|c| ((c + 1.0) / (n + 2.0)).ln());
        NaiveBayes { log_prior, log_prob }
    }

    /// Posterior probability of class 1.
    pub fn predict_proba(&self, rows: &Rows, r: u32) -> f64 {
        let (idx, val) = rows.row(r);
        let mut ll = self.log_prior;
        for c in 0..2 {
            for (&f, &v) in idx.iter().zip(val) {
                ll[c] += v * self.log_prob[c][f as usize];
            }
        }
        1.0 / (1.0 + (ll[0] - ll[1]).exp())
    }
}
