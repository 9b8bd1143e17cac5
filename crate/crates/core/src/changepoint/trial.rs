use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bayes::NaiveBayes;
use super::dataset::{dedup_rows, Rows};
use super::forest::{Forest, ForestParams};
use super::{mix, AccuracyMetric, Backend, ClassifierConfig, Observation, Segment, SignificanceConfig, TrialScore};
use crate::corpus::{Timestamp, SECONDS_PER_DAY};
use crate::error::{Error, Result};

const SUBSAMPLE_STREAM: u64 = 0x5ab5;
const PERMUTATION_STREAM: u64 = 0x9e77;

/// The observations of one segment in training-ready form.
struct SegmentData {
    rows: Rows,
    row_ids: Vec<u32>,
    timestamps: Vec<Timestamp>,
}

impl SegmentData {
    fn new(data: &[Observation], segment: Segment) -> Self {
        let inside: Vec<&Observation> = data.iter().filter(|o| segment.contains(o.timestamp)).collect();
        let dim = data.first().map_or(0, |o| o.features.dim());
        let (rows, row_ids) = dedup_rows(dim, inside.iter().map(|o| &o.features));
        let timestamps = inside.iter().map(|o| o.timestamp).collect();
        Self {
            rows,
            row_ids,
            timestamps,
        }
    }
}

/// Scores one trial boundary: cross-validated accuracy of separating
/// documents with `timestamp < tau` from the rest, against the null.
pub fn score_trial(data: &[Observation], tau: Timestamp, cfg: &ClassifierConfig) -> Result<TrialScore> {
    cfg.validate()?;
    let segment = Segment::covering(data).ok_or(Error::EmptyCorpus)?;
    let seg = SegmentData::new(data, segment);
    score_on(&seg, &seg.timestamps, tau, cfg)
}

fn score_on(seg: &SegmentData, timestamps: &[Timestamp], tau: Timestamp, cfg: &ClassifierConfig) -> Result<TrialScore> {
    let trial_seed = mix(cfg.seed, tau as u64);
    let mut docs: Vec<usize> = (0..timestamps.len()).collect();
    if docs.len() > cfg.max_docs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(trial_seed, SUBSAMPLE_STREAM));
        let mut picked = rand::seq::index::sample(&mut rng, docs.len(), cfg.max_docs).into_vec();
        picked.sort_unstable();
        docs = picked;
    }
    let labels: Vec<u8> = docs.iter().map(|&d| (timestamps[d] < tau) as u8).collect();
    let rows: Vec<u32> = docs.iter().map(|&d| seg.row_ids[d]).collect();

    let per_class = [labels.iter().filter(|&&l| l == 0).count(), labels.iter().filter(|&&l| l == 1).count()];
    if per_class.iter().any(|&n| n < cfg.cv_folds) {
        return Err(Error::SegmentTooSmall(format!(
            "{} before / {} after tau, need at least {} on each side",
            per_class[1], per_class[0], cfg.cv_folds
        )));
    }

    let folds = stratified_folds(&labels, cfg.cv_folds, trial_seed);
    let mut correct = [0usize; 2];
    for fold in 0..cfg.cv_folds {
        let train: Vec<(u32, u8)> = (0..labels.len())
            .filter(|&i| folds[i] != fold)
            .map(|i| (rows[i], labels[i]))
            .collect();
        let predict = fit(&seg.rows, &train, cfg, mix(trial_seed, fold as u64 + 1));
        let mut cache: Vec<Option<u8>> = vec![None; seg.rows.len()];
        for i in (0..labels.len()).filter(|&i| folds[i] == fold) {
            let r = rows[i];
            let pred = *cache[r as usize].get_or_insert_with(|| predict(r));
            if pred == labels[i] {
                correct[labels[i] as usize] += 1;
            }
        }
    }

    let n = labels.len() as f64;
    let (accuracy, null_accuracy) = match cfg.metric {
        AccuracyMetric::Raw => {
            let p = per_class[1] as f64 / n;
            ((correct[0] + correct[1]) as f64 / n, p.max(1.0 - p))
        }
        AccuracyMetric::Balanced => {
            let r0 = correct[0] as f64 / per_class[0] as f64;
            let r1 = correct[1] as f64 / per_class[1] as f64;
            (0.5 * (r0 + r1), 0.5)
        }
    };
    Ok(TrialScore {
        tau,
        accuracy,
        null_accuracy,
        gain: accuracy - null_accuracy,
    })
}

fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    folds
}

/// Trains the configured backend and returns a class predictor over rows.
fn fit<'a>(rows: &'a Rows, train: &[(u32, u8)], cfg: &ClassifierConfig, seed: u64) -> Box<dyn Fn(u32) -> u8 + 'a> {
    let majority = {
        let ones = train.iter().filter(|s| s.1 == 1).count();
        (2 * ones > train.len()) as u8
    };
    let decide = move |p: f64| -> u8 {
        if p > 0.5 {
            1
        } else if p < 0.5 {
            0
        } else {
            majority
        }
    };
    match cfg.backend {
        Backend::RandomForest => {
            let max_features = cfg
                .max_features
                .unwrap_or_else(|| (rows.dim as f64).sqrt().ceil() as usize)
                .max(1);
            let params = ForestParams {
                n_trees: cfg.n_trees,
                max_depth: cfg.max_depth,
                max_features,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let forest = Forest::fit(rows, train, params, &mut rng);
            Box::new(move |r| decide(forest.predict_proba(rows, r)))
        }
        Backend::NaiveBayes => {
            let nb = NaiveBayes::fit(rows, train, 1.0);
            Box::new(move |r| decide(nb.predict_proba(rows, r)))
        }
    }
}

/// Day boundaries inside `segment` that leave at least `min_days` on each side.
pub fn candidate_taus(segment: Segment, min_days: usize) -> Vec<Timestamp> {
    let days = segment.days();
    let min_days = min_days.max(1) as i64;
    (min_days..=days - min_days)
        .map(|k| segment.start + k * SECONDS_PER_DAY)
        .collect()
}

/// Every trial score of a segment plus the best (earliest on ties).
#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub trials: Vec<TrialScore>,
}

impl Scan {
    pub fn best(&self) -> Option<&TrialScore> {
        self.trials
            .iter()
            .fold(None, |best: Option<&TrialScore>, t| match best {
                Some(b) if b.gain >= t.gain => Some(b),
                _ => Some(t),
            })
    }
}

fn scan_with(seg: &SegmentData, timestamps: &[Timestamp], taus: &[Timestamp], cfg: &ClassifierConfig) -> Result<Scan> {
    let trials = taus
        .par_iter()
        .map(|&tau| score_on(seg, timestamps, tau, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scan { trials })
}

/// Scores every candidate boundary of `segment` without a significance test.
pub fn scan_segment(data: &[Observation], segment: Segment, cfg: &ClassifierConfig, min_days: usize) -> Result<Scan> {
    cfg.validate()?;
    let seg = SegmentData::new(data, segment);
    let taus = candidate_taus(segment, min_days);
    scan_with(&seg, &seg.timestamps, &taus, cfg)
}

/// An accepted change point.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub tau: Timestamp,
    pub gain: f64,
    pub threshold: f64,
    pub scan: Scan,
}

/// Best boundary of `segment` if its gain clears the significance rule.
///
/// Segments shorter than `2 * min_days` days, or whose trials cannot be
/// cross-validated, yield `None`.
pub fn detect_segment(
    data: &[Observation],
    segment: Segment,
    cfg: &ClassifierConfig,
    sig: &SignificanceConfig,
    min_days: usize,
) -> Result<Option<Detection>> {
    cfg.validate()?;
    let seg = SegmentData::new(data, segment);
    let taus = candidate_taus(segment, min_days);
    if taus.is_empty() {
        return Ok(None);
    }
    let scan = match scan_with(&seg, &seg.timestamps, &taus, cfg) {
        Ok(s) => s,
        Err(Error::SegmentTooSmall(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let best = scan.best().expect("non-empty scan").clone();

    let threshold = match *sig {
        SignificanceConfig::Threshold { gain } => gain,
        SignificanceConfig::Permutation { rounds, quantile } => {
            if rounds == 0 || !(0.0..=1.0).contains(&quantile) {
                return Err(Error::Config("permutation test needs rounds >= 1 and quantile in [0, 1]".into()));
            }
            let mut maxima = Vec::with_capacity(rounds);
            for round in 0..rounds {
                let mut shuffled = seg.timestamps.clone();
                let seed = mix(mix(cfg.seed, PERMUTATION_STREAM), mix(segment.start as u64, round as u64));
                shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let s = scan_with(&seg, &shuffled, &taus, cfg)?;
                maxima.push(s.best().map_or(f64::NEG_INFINITY, |t| t.gain));
            }
            maxima.sort_by(f64::total_cmp);
            let rank = ((quantile * rounds as f64).ceil() as usize).clamp(1, rounds);
            maxima[rank - 1]
        }
    };
    Ok((best.gain > threshold).then_some(Detection {
        tau: best.tau,
        gain: best.gain,
        threshold,
        scan,
    }))
}
