//! Per-frame ranking of narrative fragments by log-odds ratios with
//! informative Dirichlet priors.
//!
//! For triplet `t` with frequencies `f` and slice sizes `n` in the target (T),
//! reference (R) and background (B) slices:
//!
//! ```text
//! s = ln((fT + fB) / (nT + nB - fT - fB)) - ln((fR + fB) / (nR + nB - fR - fB))
//! ```
//!
//! [`LogOddsForm::AddedBackground`] adds `fB` in the denominators instead of
//! subtracting it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::changepoint::Segment;
use crate::corpus::{format_timestamp, NarrativeTriplet, TripletKey};
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 15;

/// Triplet frequencies of one corpus slice.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    counts: BTreeMap<TripletKey, u64>,
    n: u64,
}

impl CorpusCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triplets<'a>(triplets: impl IntoIterator<Item = &'a NarrativeTriplet>) -> Self {
        let mut c = Self::new();
        for t in triplets {
            c.add(t.key(), 1);
        }
        c
    }

    pub fn add(&mut self, key: TripletKey, count: u64) {
        if count > 0 {
            *self.counts.entry(key).or_default() += count;
            self.n += count;
        }
    }

    pub fn get(&self, key: &TripletKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn keys(&self) -> impl Iterator<Item = &TripletKey> {
        self.counts.keys()
    }
}

impl FromIterator<(TripletKey, u64)> for CorpusCounts {
    fn from_iter<I: IntoIterator<Item = (TripletKey, u64)>>(iter: I) -> Self {
        let mut c = Self::new();
        for (k, n) in iter {
            c.add(k, n);
        }
        c
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogOddsForm {
    #[default]
    Canonical,
    AddedBackground,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub triplet: TripletKey,
    pub s_w: f64,
    pub f_target: u64,
    pub f_reference: u64,
    pub f_background: u64,
}

/// One side of the score: `ln((f + fb) / (n + nb - f -/+ fb))`.
fn side(f: u64, n: u64, fb: u64, nb: u64, form: LogOddsForm) -> Option<f64> {
    let num = (f + fb) as f64;
    let den = match form {
        LogOddsForm::Canonical => (n + nb) as f64 - f as f64 - fb as f64,
        LogOddsForm::AddedBackground => (n + nb) as f64 - f as f64 + fb as f64,
    };
    (num > 0.0 && den > 0.0).then(|| (num / den).ln())
}

/// Scores every triplet present in any of the three slices, in key order.
pub fn log_odds(
    target: &CorpusCounts,
    reference: &CorpusCounts,
    background: &CorpusCounts,
    form: LogOddsForm,
) -> Result<Vec<Score>> {
    if background.is_empty() {
        return Err(Error::BackgroundTooSmall("<empty background>".into()));
    }
    let keys: BTreeSet<&TripletKey> = target.keys().chain(reference.keys()).chain(background.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let (ft, fr, fb) = (target.get(k), reference.get(k), background.get(k));
            let t = side(ft, target.n(), fb, background.n(), form);
            let r = side(fr, reference.n(), fb, background.n(), form);
            match (t, r) {
                (Some(t), Some(r)) => Ok(Score {
                    triplet: k.clone(),
                    s_w: t - r,
                    f_target: ft,
                    f_reference: fr,
                    f_background: fb,
                }),
                _ => Err(Error::BackgroundTooSmall(k.to_string())),
            }
        })
        .collect()
}

/// How the reference and background slices are chosen for a time frame.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    /// R is the previous frame (the rest of the corpus for the first frame),
    /// B the whole corpus.
    #[default]
    PreviousFrame,
    /// T and R are two sub-corpora, told apart by a document tag, within the
    /// same frame; B is everything in that frame.
    ContrastCorpus { target: String, reference: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFragment {
    pub rank: usize,
    pub triplet: TripletKey,
    pub s_w: f64,
    pub f_target: u64,
    pub f_reference: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRanking {
    pub frame: Segment,
    pub fragments: Vec<RankedFragment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankConfig {
    pub scheme: Scheme,
    pub k: usize,
    pub form: LogOddsForm,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::PreviousFrame,
            k: DEFAULT_TOP_K,
            form: LogOddsForm::Canonical,
        }
    }
}

/// Keeps triplets seen in the target, sorted by score, then target frequency,
/// then rendered text.
fn top_k(scores: Vec<Score>, k: usize) -> Vec<RankedFragment> {
    let mut kept: Vec<(String, Score)> = scores
        .into_iter()
        .filter(|s| s.f_target > 0)
        .map(|s| (s.triplet.render(), s))
        .collect();
    kept.sort_by(|(ra, a), (rb, b)| {
        b.s_w
            .total_cmp(&a.s_w)
            .then(b.f_target.cmp(&a.f_target))
            .then_with(|| ra.cmp(rb))
    });
    kept.into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (_, s))| RankedFragment {
            rank: i + 1,
            triplet: s.triplet,
            s_w: s.s_w,
            f_target: s.f_target,
            f_reference: s.f_reference,
        })
        .collect()
}

/// All scores of each frame's target slice under the configured scheme.
/// `tags` maps document ids to their sub-corpus and is required by the
/// contrast scheme.
pub fn frame_scores(
    frames: &[Segment],
    triplets: &[NarrativeTriplet],
    cfg: &RankConfig,
    tags: Option<&HashMap<String, String>>,
) -> Result<Vec<Vec<Score>>> {
    let in_frame = |f: Segment| triplets.iter().filter(move |t| f.contains(t.timestamp));
    match &cfg.scheme {
        Scheme::PreviousFrame => {
            let background = CorpusCounts::from_triplets(triplets);
            frames
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let target = CorpusCounts::from_triplets(in_frame(*f));
                    let reference = match i {
                        0 => CorpusCounts::from_triplets(triplets.iter().filter(|t| !f.contains(t.timestamp))),
                        _ => CorpusCounts::from_triplets(in_frame(frames[i - 1])),
                    };
                    log_odds(&target, &reference, &background, cfg.form)
                })
                .collect()
        }
        Scheme::ContrastCorpus { target, reference } => {
            let tags = tags.ok_or_else(|| Error::Config("contrast scheme needs document tags".into()))?;
            let tag_of = |t: &NarrativeTriplet| tags.get(&t.doc_id).map(String::as_str);
            frames
                .iter()
                .map(|f| {
                    let background = CorpusCounts::from_triplets(in_frame(*f));
                    if background.is_empty() {
                        return Ok(Vec::new());
                    }
                    let t = CorpusCounts::from_triplets(in_frame(*f).filter(|x| tag_of(x) == Some(target)));
                    let r = CorpusCounts::from_triplets(in_frame(*f).filter(|x| tag_of(x) == Some(reference)));
                    log_odds(&t, &r, &background, cfg.form)
                })
                .collect()
        }
    }
}

/// Top `k` fragments of each frame.
pub fn rank_frames(
    frames: &[Segment],
    triplets: &[NarrativeTriplet],
    cfg: &RankConfig,
    tags: Option<&HashMap<String, String>>,
) -> Result<Vec<FrameRanking>> {
    let scores = frame_scores(frames, triplets, cfg, tags)?;
    Ok(rankings_from_scores(frames, scores, cfg.k))
}

/// Top `k` of precomputed per-frame scores.
pub fn rankings_from_scores(frames: &[Segment], scores: Vec<Vec<Score>>, k: usize) -> Vec<FrameRanking> {
    frames
        .iter()
        .zip(scores)
        .map(|(f, s)| FrameRanking {
            frame: *f,
            fragments: top_k(s, k),
        })
        .collect()
}

/// Comma-separated report, one row per ranked fragment.
pub fn rankings_csv(rankings: &[FrameRanking]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record(["frame_start", "frame_end", "rank", "a0", "frame", "a1", "s_w", "f_target", "f_reference"])
        .map_err(io)?;
    for r in rankings {
        for f in &r.fragments {
            w.write_record([
                format_timestamp(r.frame.start),
                format_timestamp(r.frame.end),
                f.rank.to_string(),
                f.triplet.a0.clone(),
                f.triplet.frame.clone(),
                f.triplet.a1.clone(),
                format!("{:.6}", f.s_w),
                f.f_target.to_string(),
                f.f_reference.to_string(),
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
