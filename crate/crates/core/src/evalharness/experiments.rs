//! Experiment drivers over synthetic runs: change point gaps under noise and
//! overlap, and clustering quality against planted events.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{absolute_match, coherence, relative_pr, PrecisionRecall};
use crate::changepoint::{
    featurize, kernel_cpd, scan_segment, AccuracyMetric, ClassifierConfig, KernelConfig, KernelInput, Observation,
    Segment,
};
use crate::corpus::{build_vocabulary, Timestamp, DEFAULT_VOCAB_SIZE, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::fragments::{alt_cluster, birch_fit, frame_map, AltMethod, EmbeddingSource, FrameMap, DEFAULT_BRANCHING};
use crate::synthgen::{gen_cluster_run, gen_noise_run, gen_overlap_run, EventPool, RunConfig, SynthRun};

/// Change point methods compared in the gap experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locator {
    Mtchd,
    KernelDaily,
    KernelDocs,
}

impl Locator {
    pub fn as_str(self) -> &'static str {
        match self {
            Locator::Mtchd => "mtchd",
            Locator::KernelDaily => "kernel_daily",
            Locator::KernelDocs => "kernel_docs",
        }
    }
}

/// Settings shared by the noise and overlap experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocateConfig {
    pub run: RunConfig,
    pub classifier: ClassifierConfig,
    pub vocab_size: usize,
    /// Minimum days on each side of a candidate split.
    pub min_days: usize,
    pub locators: Vec<Locator>,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for LocateConfig {
    fn default() -> Self {
        Self {
            run: RunConfig::default(),
            classifier: ClassifierConfig {
                metric: AccuracyMetric::Balanced,
                ..ClassifierConfig::default()
            },
            vocab_size: DEFAULT_VOCAB_SIZE,
            min_days: 1,
            locators: vec![Locator::Mtchd, Locator::KernelDaily, Locator::KernelDocs],
            repetitions: 10,
            seed: 0,
        }
    }
}

/// Predicted change per locator for one synthetic run, as day offsets from
/// the run start.
pub fn locate_change(run: &SynthRun, cfg: &LocateConfig, seed: u64) -> Result<Vec<(Locator, f64)>> {
    let vocab = build_vocabulary(&run.docs, cfg.vocab_size)?;
    let obs: Vec<Observation> = featurize(&run.docs, &vocab);
    let segment = Segment::covering(&obs).ok_or(Error::EmptyCorpus)?;
    let start = run.manifest.timeline.config.start;
    let day = |t: Timestamp| (t - start) as f64 / SECONDS_PER_DAY as f64;
    cfg.locators
        .iter()
        .map(|&l| {
            let tau = match l {
                Locator::Mtchd => {
                    let classifier = ClassifierConfig {
                        seed,
                        ..cfg.classifier.clone()
                    };
                    let scan = scan_segment(&obs, segment, &classifier, cfg.min_days)?;
                    scan.best().ok_or_else(|| Error::SegmentTooSmall("no candidate split".into()))?.tau
                }
                Locator::KernelDaily | Locator::KernelDocs => {
                    let kc = KernelConfig {
                        input: if l == Locator::KernelDaily {
                            KernelInput::DailyMean
                        } else {
                            KernelInput::Documents
                        },
                        min_days: cfg.min_days,
                        ..KernelConfig::default()
                    };
                    kernel_cpd(&obs, segment, &kc)?.tau
                }
            };
            Ok((l, day(tau)))
        })
        .collect()
}

/// One predicted change for one repetition of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub locator: Locator,
    pub rep: usize,
    pub predicted_day: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub noise_ratio: f64,
    pub a1: f64,
    pub a2: f64,
    pub overlap_days: usize,
    pub samples: Vec<GapSample>,
}

impl GapPoint {
    pub fn mean_gap(&self, l: Locator) -> Option<f64> {
        let g: Vec<f64> = self.samples.iter().filter(|s| s.locator == l).map(|s| s.gap).collect();
        (!g.is_empty()).then(|| g.iter().sum::<f64>() / g.len() as f64)
    }

    pub fn mean_predicted(&self, l: Locator) -> Option<f64> {
        let g: Vec<f64> = self.samples.iter().filter(|s| s.locator == l).map(|s| s.predicted_day).collect();
        (!g.is_empty()).then(|| g.iter().sum::<f64>() / g.len() as f64)
    }
}

/// Gap between predicted and planted change, in days, over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    pub true_day: f64,
    pub points: Vec<GapPoint>,
}

fn true_day(cfg: &RunConfig) -> Result<f64> {
    match cfg.change_days.as_slice() {
        [d] => Ok(*d as f64),
        _ => Err(Error::Config("gap experiments need exactly one change day".into())),
    }
}

fn gap_point(
    cfg: &LocateConfig,
    truth: f64,
    (noise_ratio, a1, a2, overlap_days): (f64, f64, f64, usize),
    make: impl Fn(u64) -> Result<SynthRun> + Sync,
) -> Result<GapPoint> {
    let per_rep: Vec<Vec<GapSample>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let seed = cfg.seed.wrapping_add(rep as u64);
            let run = make(seed)?;
            Ok(locate_change(&run, cfg, seed)?
                .into_iter()
                .map(|(locator, predicted_day)| GapSample {
                    locator,
                    rep,
                    predicted_day,
                    gap: (predicted_day - truth).abs(),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(GapPoint {
        noise_ratio,
        a1,
        a2,
        overlap_days,
        samples: per_rep.into_iter().flatten().collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseExperiment {
    pub ratios: Vec<f64>,
    #[serde(flatten)]
    pub locate: LocateConfig,
}

impl Default for NoiseExperiment {
    fn default() -> Self {
        Self {
            ratios: (0..10).map(|i| i as f64 / 10.0).collect(),
            locate: LocateConfig::default(),
        }
    }
}

pub fn run_noise_experiment(pool: &EventPool, exp: &NoiseExperiment) -> Result<GapCurve> {
    let truth = true_day(&exp.locate.run)?;
    let points = exp
        .ratios
        .iter()
        .map(|&r| {
            gap_point(&exp.locate, truth, (r, 0.0, 0.0, 0), |seed| {
                gen_noise_run(pool, r, seed, &exp.locate.run)
            })
        })
        .collect::<Result<_>>()?;
    Ok(GapCurve { true_day: truth, points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlapExperiment {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub overlap_days: Vec<usize>,
    #[serde(flatten)]
    pub locate: LocateConfig,
}

impl Default for OverlapExperiment {
    fn default() -> Self {
        let grid: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        Self {
            a1: grid.clone(),
            a2: grid,
            overlap_days: vec![0, 2, 4],
            locate: LocateConfig {
                locators: vec![Locator::Mtchd],
                ..LocateConfig::default()
            },
        }
    }
}

/// Full `overlap_days x a1 x a2` grid, in that nesting order.
pub fn run_overlap_experiment(pool: &EventPool, exp: &OverlapExperiment) -> Result<GapCurve> {
    let truth = true_day(&exp.locate.run)?;
    let mut points = Vec::new();
    for &d in &exp.overlap_days {
        for &a1 in &exp.a1 {
            for &a2 in &exp.a2 {
                points.push(gap_point(&exp.locate, truth, (0.0, a1, a2, d), |seed| {
                    gen_overlap_run(pool, a1, a2, d, seed, &exp.locate.run)
                })?);
            }
        }
    }
    Ok(GapCurve { true_day: truth, points })
}

/// Long-form gap report: one row per sample.
pub fn gap_samples_csv(curve: &GapCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["noise_ratio", "a1", "a2", "overlap_days", "locator", "rep", "predicted_day", "gap"])
        .map_err(csv_err)?;
    for p in &curve.points {
        for s in &p.samples {
            w.write_record([
                p.noise_ratio.to_string(),
                p.a1.to_string(),
                p.a2.to_string(),
                p.overlap_days.to_string(),
                s.locator.as_str().to_string(),
                s.rep.to_string(),
                s.predicted_day.to_string(),
                s.gap.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

/// Plot-ready summary: mean gap and mean predicted day per cell and locator.
pub fn gap_summary_csv(curve: &GapCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["noise_ratio", "a1", "a2", "overlap_days", "locator", "mean_gap", "mean_predicted_day"])
        .map_err(csv_err)?;
    for p in &curve.points {
        let mut locators: Vec<Locator> = p.samples.iter().map(|s| s.locator).collect();
        locators.sort();
        locators.dedup();
        for l in locators {
            w.write_record([
                p.noise_ratio.to_string(),
                p.a1.to_string(),
                p.a2.to_string(),
                p.overlap_days.to_string(),
                l.as_str().to_string(),
                format!("{:.4}", p.mean_gap(l).unwrap_or(f64::NAN)),
                format!("{:.4}", p.mean_predicted(l).unwrap_or(f64::NAN)),
            ])
            .map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A clustering method evaluated by the cluster experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ClusterMethod {
    Birch { threshold: f64 },
    Kmeans { k: usize },
    Dbscan { eps: f64, min_pts: usize },
}

impl ClusterMethod {
    pub fn label(&self) -> String {
        match self {
            ClusterMethod::Birch { threshold } => format!("birch(t={threshold})"),
            ClusterMethod::Kmeans { k } => format!("kmeans(k={k})"),
            ClusterMethod::Dbscan { eps, min_pts } => format!("dbscan(eps={eps},min_pts={min_pts})"),
        }
    }

    /// One label per point; DBSCAN noise points become singletons.
    fn assign(&self, vectors: &[Vec<f64>], seed: u64) -> Result<Vec<usize>> {
        match *self {
            ClusterMethod::Birch { threshold } => {
                if !(threshold > 0.0) {
                    return Err(Error::Config("BIRCH threshold must be positive".into()));
                }
                Ok(birch_fit(vectors, None, threshold, DEFAULT_BRANCHING).labels)
            }
            ClusterMethod::Kmeans { k } => Ok(alt_cluster(
                vectors,
                &AltMethod::Kmeans {
                    k,
                    seed,
                    max_iter: 100,
                },
            )?
            .into_iter()
            .map(|l| l.expect("kmeans labels every point"))
            .collect()),
            ClusterMethod::Dbscan { eps, min_pts } => {
                let labels = alt_cluster(vectors, &AltMethod::Dbscan { eps, min_pts })?;
                let mut next = labels.iter().flatten().max().map_or(0, |m| m + 1);
                Ok(labels
                    .into_iter()
                    .map(|l| {
                        l.unwrap_or_else(|| {
                            next += 1;
                            next - 1
                        })
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStat {
    pub size: usize,
    pub coherence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterEvalResult {
    pub method: String,
    pub n_noise: usize,
    pub rep: usize,
    pub n_clusters: usize,
    pub relative: PrecisionRecall,
    pub absolute: PrecisionRecall,
    pub mean_coherence: f64,
    pub clusters: Vec<ClusterStat>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterExperiment {
    pub n_noise: Vec<usize>,
    pub methods: Vec<ClusterMethod>,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(skip)]
    pub embedding: EmbeddingSource,
}

impl Default for ClusterExperiment {
    fn default() -> Self {
        let mut methods: Vec<ClusterMethod> = [0.3, 0.4, 0.5, 0.6, 0.7]
            .into_iter()
            .chain([1.0, 1.5, 2.0, 2.5, 3.0, 3.5])
            .map(|threshold| ClusterMethod::Birch { threshold })
            .collect();
        methods.push(ClusterMethod::Kmeans { k: 22 });
        methods.push(ClusterMethod::Dbscan { eps: 0.8, min_pts: 2 });
        Self {
            n_noise: (0..=8).map(|i| i * 13).collect(),
            methods,
            repetitions: 10,
            seed: 0,
            embedding: EmbeddingSource::default(),
        }
    }
}

/// Evaluates one method on one labelled run.
pub fn evaluate_clustering(
    vectors: &[Vec<f64>],
    truth: &[&str],
    events: &[&str],
    method: &ClusterMethod,
    seed: u64,
) -> Result<(Vec<usize>, PrecisionRecall, PrecisionRecall, Vec<ClusterStat>)> {
    let labels = method.assign(vectors, seed)?;
    let relative = relative_pr(truth, &labels)?;
    let absolute = absolute_match(truth, &labels, events)?;
    let n = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); n];
    for (v, &l) in vectors.iter().zip(&labels) {
        members[l].push(v);
    }
    let clusters = members
        .iter()
        .filter(|m| !m.is_empty())
        .map(|m| {
            Ok(ClusterStat {
                size: m.len(),
                coherence: coherence(m)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((labels, relative, absolute, clusters))
}

/// Every method on every `(n_noise, rep)` run. Items are frame-mapped
/// triplets rendered as `"A0 frame A1"`; reference items are labelled by
/// event, noise items are singletons.
pub fn run_cluster_experiment(pool: &EventPool, exp: &ClusterExperiment) -> Result<Vec<ClusterEvalResult>> {
    let events: Vec<&str> = pool.reference_events.iter().map(|e| e.id.as_str()).collect();
    let mut out = Vec::new();
    for &n_noise in &exp.n_noise {
        for rep in 0..exp.repetitions {
            let seed = exp.seed.wrapping_add(rep as u64);
            let items = gen_cluster_run(pool, n_noise, seed)?;
            let texts: Vec<String> = items
                .iter()
                .map(|it| frame_map(&it.triplet, FrameMap::bundled()).render())
                .collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let vectors = exp.embedding.embed(&refs)?;
            let truth: Vec<&str> = items.iter().map(|i| i.label.as_str()).collect();
            for m in &exp.methods {
                let (labels, relative, absolute, clusters) = evaluate_clustering(&vectors, &truth, &events, m, seed)?;
                let mean_coherence = clusters.iter().map(|c| c.coherence).sum::<f64>() / clusters.len().max(1) as f64;
                out.push(ClusterEvalResult {
                    method: m.label(),
                    n_noise,
                    rep,
                    n_clusters: labels.iter().max().map_or(0, |m| m + 1),
                    relative,
                    absolute,
                    mean_coherence,
                    clusters,
                });
            }
        }
    }
    Ok(out)
}

/// Mean of `f` over the results for one method and noise level.
pub fn mean_by(results: &[ClusterEvalResult], method: &str, n_noise: usize, f: impl Fn(&ClusterEvalResult) -> f64) -> Option<f64> {
    let xs: Vec<f64> = results
        .iter()
        .filter(|r| r.method == method && r.n_noise == n_noise)
        .map(f)
        .collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn cluster_results_csv(results: &[ClusterEvalResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "n_noise",
        "rep",
        "n_clusters",
        "relative_precision",
        "relative_recall",
        "absolute_precision",
        "absolute_recall",
        "mean_coherence",
    ])
    .map_err(csv_err)?;
    for r in results {
        w.write_record([
            r.method.clone(),
            r.n_noise.to_string(),
            r.rep.to_string(),
            r.n_clusters.to_string(),
            format!("{:.6}", r.relative.precision),
            format!("{:.6}", r.relative.recall),
            format!("{:.6}", r.absolute.precision),
            format!("{:.6}", r.absolute.recall),
            format!("{:.6}", r.mean_coherence),
        ])
        .map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Cluster size against coherence, one row per predicted cluster.
pub fn coherence_by_size_csv(results: &[ClusterEvalResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "n_noise", "rep", "size", "coherence"]).map_err(csv_err)?;
    for r in results {
        for c in &r.clusters {
            w.write_record([
                r.method.clone(),
                r.n_noise.to_string(),
                r.rep.to_string(),
                c.size.to_string(),
                format!("{:.6}", c.coherence),
            ])
            .map_err(csv_err)?;
        }
    }
    finish_csv(w)
}
