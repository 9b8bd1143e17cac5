//! Synthetic corpora with planted narratives.
//!
//! Event files are `#nfv1` record files with one tab-separated record per line,
//! `id  date  summary`. The bundled pools hold 22 reference events from the
//! early COVID-19 timeline and 100 unrelated noise events. Reference summaries
//! are expanded with template paraphrases; every narrative carries the
//! triplets extracted from it by the bundled pattern rules.
//!
//! Generators emit a document stream, its triplets and a [`Manifest`] that
//! records the exact composition of every day, so a run can be re-rendered
//! byte for byte from its manifest.

mod extract;
mod lexicon;
mod paraphrase;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use extract::{extract_triplets, sentences};
pub use lexicon::{Form, Lexicon, VerbEntry};
pub use paraphrase::paraphrases;

use crate::changepoint::mix;
use crate::corpus::{parse_timestamp, render_documents, render_triplets, Document, NarrativeTriplet, Timestamp, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::format::{split_records, Header};

const REFERENCE_EVENTS: &str = include_str!("../../data/reference_events.tsv");
const NOISE_EVENTS: &str = include_str!("../../data/noise_events.tsv");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub id: String,
    pub date: Timestamp,
    pub summary: String,
}

/// Parses an event file.
pub fn parse_events(text: &str) -> Result<Vec<EventRecord>> {
    let (_, lines) = split_records(text)?;
    let mut out: Vec<EventRecord> = Vec::with_capacity(lines.len());
    let mut seen = BTreeSet::new();
    for (n, line) in lines {
        let mut cols = line.splitn(3, '\t');
        let (Some(id), Some(date), Some(summary)) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::parse(n, "expected `id<TAB>date<TAB>summary`"));
        };
        let (id, summary) = (id.trim(), summary.trim());
        if id.is_empty() || summary.is_empty() {
            return Err(Error::parse(n, "empty event id or summary"));
        }
        let date = parse_timestamp(date).ok_or_else(|| Error::parse(n, format!("bad date `{}`", date.trim())))?;
        if !seen.insert(id.to_string()) {
            return Err(Error::parse(n, format!("duplicate event id `{id}`")));
        }
        out.push(EventRecord {
            id: id.to_string(),
            date,
            summary: summary.to_string(),
        });
    }
    Ok(out)
}

pub fn render_events(events: &[EventRecord]) -> String {
    let mut s = Header::default().render();
    s.push('\n');
    for e in events {
        let date = chrono::DateTime::from_timestamp(e.date, 0)
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_else(|| e.date.to_string());
        s.push_str(&format!("{}\t{}\t{}\n", e.id, date, e.summary));
    }
    s
}

pub fn bundled_reference_events() -> Vec<EventRecord> {
    parse_events(REFERENCE_EVENTS).expect("bundled reference events are valid")
}

pub fn bundled_noise_events() -> Vec<EventRecord> {
    parse_events(NOISE_EVENTS).expect("bundled noise events are valid")
}

/// One sentence of the pool with its source event and extracted triplets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Narrative {
    pub id: String,
    pub event: String,
    pub text: String,
    pub triplets: Vec<NarrativeTriplet>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoolConfig {
    pub paraphrases_per_event: usize,
    /// Trim or extend paraphrases round-robin until the reference pool holds
    /// exactly this many narratives.
    pub target_total: Option<usize>,
    pub seed: u64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            paraphrases_per_event: 8,
            target_total: Some(197),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EventPool {
    pub reference_events: Vec<EventRecord>,
    pub noise_events: Vec<EventRecord>,
    /// Reference narratives grouped by event, originals first.
    pub reference: Vec<Vec<Narrative>>,
    pub noise: Vec<Narrative>,
}

impl EventPool {
    /// The bundled events under the default [`PoolConfig`].
    pub fn bundled() -> Result<EventPool> {
        build_pool(
            &bundled_reference_events(),
            &bundled_noise_events(),
            &PoolConfig::default(),
            Lexicon::bundled(),
        )
    }

    pub fn reference_count(&self) -> usize {
        self.reference.iter().map(Vec::len).sum()
    }

    pub fn noise_triplet_count(&self) -> usize {
        self.noise.iter().map(|n| n.triplets.len()).sum()
    }

    fn narrative(&self, id: &str) -> Option<&Narrative> {
        self.reference.iter().flatten().chain(&self.noise).find(|n| n.id == id)
    }
}

fn narrative(lex: &Lexicon, id: String, event: &str, text: String) -> Narrative {
    let triplets = sentences(&text).into_iter().flat_map(|s| extract_triplets(lex, s)).collect();
    Narrative {
        id,
        event: event.to_string(),
        text,
        triplets,
    }
}

pub fn build_pool(reference: &[EventRecord], noise: &[EventRecord], cfg: &PoolConfig, lex: &Lexicon) -> Result<EventPool> {
    let n = reference.len();
    let k = cfg.paraphrases_per_event;
    let base = n * (1 + k);
    let extra = match cfg.target_total {
        Some(t) if t > base && n > 0 => (t - base).div_ceil(n),
        _ => 0,
    };

    let mut failed = Vec::new();
    let mut candidates: Vec<(Narrative, Vec<Narrative>)> = Vec::with_capacity(n);
    for (i, e) in reference.iter().enumerate() {
        let orig = narrative(lex, format!("{}.0", e.id), &e.id, e.summary.clone());
        if orig.triplets.is_empty() {
            failed.push(e.id.clone());
            continue;
        }
        let paras = paraphrases(lex, &e.summary, k + extra, mix(cfg.seed, i as u64))
            .into_iter()
            .enumerate()
            .map(|(j, p)| narrative(lex, format!("{}.{}", e.id, j + 1), &e.id, p))
            .filter(|p| !p.triplets.is_empty())
            .collect();
        candidates.push((orig, paras));
    }
    for e in noise {
        if extract_triplets(lex, &e.summary).is_empty() {
            failed.push(e.id.clone());
        }
    }
    if !failed.is_empty() {
        return Err(Error::NoTriplet(failed));
    }

    let mut keep: Vec<usize> = candidates.iter().map(|(_, p)| p.len().min(k)).collect();
    if let Some(target) = cfg.target_total {
        let mut total: usize = keep.iter().map(|c| c + 1).sum();
        // drop from the last event backwards, add from the first forwards
        let mut i = n;
        while total > target && keep.iter().any(|&c| c > 0) {
            i = if i == 0 { n - 1 } else { i - 1 };
            if keep[i] > 0 {
                keep[i] -= 1;
                total -= 1;
            }
        }
        let mut i = 0;
        while total < target && (0..n).any(|j| keep[j] < candidates[j].1.len()) {
            if keep[i] < candidates[i].1.len() {
                keep[i] += 1;
                total += 1;
            }
            i = (i + 1) % n;
        }
        if total != target {
            return Err(Error::Config(format!(
                "cannot reach {target} reference narratives from {n} events (got {total})"
            )));
        }
    }

    let reference_narratives = candidates
        .into_iter()
        .zip(keep)
        .map(|((orig, paras), c)| std::iter::once(orig).chain(paras.into_iter().take(c)).collect())
        .collect();
    let noise_narratives = noise
        .iter()
        .map(|e| narrative(lex, e.id.clone(), &e.id, e.summary.clone()))
        .collect();
    Ok(EventPool {
        reference_events: reference.to_vec(),
        noise_events: noise.to_vec(),
        reference: reference_narratives,
        noise: noise_narratives,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// First second of day 0.
    pub start: Timestamp,
    pub days: usize,
    /// Day indices at which a new interval starts.
    pub change_days: Vec<usize>,
    pub draws_per_day: usize,
    pub events_per_interval: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            // 2020-03-12, so the change falls on March 17
            start: 1_583_971_200,
            days: 10,
            change_days: vec![5],
            draws_per_day: 200,
            events_per_interval: 3,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.days == 0 || self.draws_per_day == 0 || self.events_per_interval == 0 {
            return Err(Error::Config("days, draws_per_day and events_per_interval must be positive".into()));
        }
        if self.start % SECONDS_PER_DAY != 0 {
            return Err(Error::Config("run start must be a day boundary".into()));
        }
        let mut prev = 0;
        for &c in &self.change_days {
            if c <= prev || c >= self.days {
                return Err(Error::Config(format!(
                    "change days must be increasing and inside 1..{}",
                    self.days
                )));
            }
            prev = c;
        }
        Ok(())
    }

    fn interval_of(&self, day: usize) -> usize {
        self.change_days.iter().filter(|&&c| c <= day).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSpec {
    pub event: String,
    pub a1: f64,
    pub a2: f64,
    pub days: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub config: RunConfig,
    /// Reference event ids per interval.
    pub intervals: Vec<Vec<String>>,
    pub noise_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapSpec>,
}

impl Timeline {
    pub fn change_timestamps(&self) -> Vec<Timestamp> {
        self.config
            .change_days
            .iter()
            .map(|&d| self.config.start + d as i64 * SECONDS_PER_DAY)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawKind {
    Reference,
    Overlap,
    Noise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub day: usize,
    pub timestamp: Timestamp,
    pub narrative: String,
    pub event: String,
    pub kind: DrawKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub timeline: Timeline,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Manifest> {
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct SynthRun {
    pub manifest: Manifest,
    pub docs: Vec<Document>,
    pub triplets: Vec<NarrativeTriplet>,
}

impl SynthRun {
    pub fn documents_file(&self) -> String {
        render_documents(&Header::default(), &self.docs)
    }

    pub fn triplets_file(&self) -> String {
        render_triplets(&Header::default(), &self.triplets)
    }
}

/// Rebuilds documents and triplets from a manifest.
pub fn render_manifest(pool: &EventPool, manifest: &Manifest) -> Result<SynthRun> {
    let mut docs = Vec::with_capacity(manifest.entries.len());
    let mut triplets = Vec::new();
    for e in &manifest.entries {
        let n = pool
            .narrative(&e.narrative)
            .ok_or_else(|| Error::Invalid(format!("manifest names unknown narrative `{}`", e.narrative)))?;
        let kind = match e.kind {
            DrawKind::Reference => "reference",
            DrawKind::Overlap => "overlap",
            DrawKind::Noise => "noise",
        };
        docs.push(
            Document::new(&e.doc_id, e.timestamp, &n.text)
                .with_meta("event", &n.event)
                .with_meta("kind", kind),
        );
        for t in &n.triplets {
            let mut t = t.clone();
            t.doc_id = e.doc_id.clone();
            t.timestamp = e.timestamp;
            triplets.push(t);
        }
    }
    Ok(SynthRun {
        manifest: manifest.clone(),
        docs,
        triplets,
    })
}

fn sample_intervals(pool: &EventPool, cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<String>>> {
    let m = cfg.events_per_interval;
    let n_intervals = cfg.change_days.len() + 1;
    let ids: Vec<&EventRecord> = pool.reference_events.iter().collect();
    if n_intervals == 2 {
        // events dated before the change feed the first interval
        let split = cfg.start + cfg.change_days[0] as i64 * SECONDS_PER_DAY;
        let (before, after): (Vec<&EventRecord>, Vec<&EventRecord>) = ids.iter().partition(|e| e.date < split);
        if before.len() >= m && after.len() >= m {
            return Ok([before, after]
                .iter()
                .map(|set| set.choose_multiple(rng, m).map(|e| e.id.clone()).collect())
                .collect());
        }
    }
    if ids.len() < m * n_intervals {
        return Err(Error::Config(format!(
            "{} reference events cannot fill {n_intervals} intervals of {m}",
            ids.len()
        )));
    }
    let chosen: Vec<&&EventRecord> = ids.choose_multiple(rng, m * n_intervals).collect();
    Ok(chosen.chunks(m).map(|c| c.iter().map(|e| e.id.clone()).collect()).collect())
}

fn event_narratives<'a>(pool: &'a EventPool, id: &str) -> &'a [Narrative] {
    pool.reference
        .iter()
        .find(|v| v.first().is_some_and(|n| n.event == id))
        .map(Vec::as_slice)
        .unwrap_or(&[])
}

fn generate(pool: &EventPool, cfg: &RunConfig, noise_ratio: f64, overlap: Option<(f64, f64, usize)>, seed: u64) -> Result<SynthRun> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&noise_ratio) {
        return Err(Error::Config(format!("noise ratio {noise_ratio} outside [0, 1)")));
    }
    if noise_ratio > 0.0 && pool.noise.is_empty() {
        return Err(Error::Config("noise requested but the noise pool is empty".into()));
    }
    let mut event_rng = ChaCha8Rng::seed_from_u64(mix(seed, 0));
    let mut overlap_rng = ChaCha8Rng::seed_from_u64(mix(seed, 1));
    let mut day_rng = ChaCha8Rng::seed_from_u64(mix(seed, 2));

    let intervals = sample_intervals(pool, cfg, &mut event_rng)?;
    let overlap = match overlap {
        None => None,
        Some((a1, a2, d)) => {
            if !(0.0..=1.0).contains(&a1) || !(0.0..=1.0).contains(&a2) {
                return Err(Error::Config("overlap ratios must lie in [0, 1]".into()));
            }
            let [c] = cfg.change_days[..] else {
                return Err(Error::Config("overlap runs need exactly one change day".into()));
            };
            if d > c || d > cfg.days - c {
                return Err(Error::Config(format!("{d} overlap days exceed the interval length")));
            }
            let used: BTreeSet<&String> = intervals.iter().flatten().collect();
            let free: Vec<&EventRecord> = pool.reference_events.iter().filter(|e| !used.contains(&e.id)).collect();
            let event = free
                .choose(&mut overlap_rng)
                .ok_or_else(|| Error::Config("no reference event left for the overlap".into()))?;
            Some(OverlapSpec {
                event: event.id.clone(),
                a1,
                a2,
                days: d,
            })
        }
    };

    let draws = cfg.draws_per_day;
    let n_noise = (noise_ratio * draws as f64).round() as usize;
    let mut entries = Vec::with_capacity(cfg.days * draws);
    for day in 0..cfg.days {
        let events: Vec<&[Narrative]> = intervals[cfg.interval_of(day)]
            .iter()
            .map(|id| event_narratives(pool, id))
            .collect();
        let n_overlap = match &overlap {
            Some(o) => {
                let c = cfg.change_days[0];
                let ratio = if day + o.days >= c && day < c {
                    o.a1
                } else if day >= c && day < c + o.days {
                    o.a2
                } else {
                    0.0
                };
                (ratio * (draws - n_noise) as f64).round() as usize
            }
            None => 0,
        };
        let n_ref = draws - n_noise - n_overlap;

        let mut slots: Vec<(&Narrative, DrawKind)> = Vec::with_capacity(draws);
        for _ in 0..n_ref {
            let narratives = events[day_rng.gen_range(0..events.len())];
            slots.push((&narratives[day_rng.gen_range(0..narratives.len())], DrawKind::Reference));
        }
        if let Some(o) = &overlap {
            let narratives = event_narratives(pool, &o.event);
            for _ in 0..n_overlap {
                slots.push((&narratives[day_rng.gen_range(0..narratives.len())], DrawKind::Overlap));
            }
        }
        for _ in 0..n_noise {
            slots.push((&pool.noise[day_rng.gen_range(0..pool.noise.len())], DrawKind::Noise));
        }
        slots.shuffle(&mut day_rng);

        let day_start = cfg.start + day as i64 * SECONDS_PER_DAY;
        for (i, (n, kind)) in slots.into_iter().enumerate() {
            entries.push(ManifestEntry {
                doc_id: format!("s{day:02}-{i:04}"),
                day,
                timestamp: day_start + (i as i64 * SECONDS_PER_DAY) / draws as i64,
                narrative: n.id.clone(),
                event: n.event.clone(),
                kind,
            });
        }
    }
    let manifest = Manifest {
        seed,
        timeline: Timeline {
            config: cfg.clone(),
            intervals,
            noise_ratio,
            overlap,
        },
        entries,
    };
    render_manifest(pool, &manifest)
}

/// A run with the interval events mixed with noise draws at `noise_ratio`.
pub fn gen_noise_run(pool: &EventPool, noise_ratio: f64, seed: u64, cfg: &RunConfig) -> Result<SynthRun> {
    generate(pool, cfg, noise_ratio, None, seed)
}

/// A noise-free run where an extra reference event takes share `a1` of the
/// draws on the `overlap_days` days before the change and share `a2` on the
/// `overlap_days` days from the change on.
pub fn gen_overlap_run(pool: &EventPool, a1: f64, a2: f64, overlap_days: usize, seed: u64, cfg: &RunConfig) -> Result<SynthRun> {
    generate(pool, cfg, 0.0, Some((a1, a2, overlap_days)), seed)
}

/// One triplet to be clustered, labeled by its source event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTriplet {
    pub narrative: String,
    pub label: String,
    pub triplet: NarrativeTriplet,
}

/// Every reference triplet plus `n_noise` noise triplets drawn without
/// replacement; each noise triplet is its own singleton label.
pub fn gen_cluster_run(pool: &EventPool, n_noise: usize, seed: u64) -> Result<Vec<LabeledTriplet>> {
    let noise: Vec<(&Narrative, &NarrativeTriplet)> =
        pool.noise.iter().flat_map(|n| n.triplets.iter().map(move |t| (n, t))).collect();
    if n_noise > noise.len() {
        return Err(Error::Config(format!(
            "{n_noise} noise triplets requested, the pool has {}",
            noise.len()
        )));
    }
    let mut out = Vec::new();
    for n in pool.reference.iter().flatten() {
        for (j, t) in n.triplets.iter().enumerate() {
            let mut t = t.clone();
            t.doc_id = format!("{}#{j}", n.id);
            out.push(LabeledTriplet {
                narrative: n.id.clone(),
                label: n.event.clone(),
                triplet: t,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 3));
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, noise.len(), n_noise).into_vec();
    picks.sort_unstable();
    for i in picks {
        let (n, t) = noise[i];
        let mut t = t.clone();
        t.doc_id = format!("{}#{i}", n.id);
        out.push(LabeledTriplet {
            narrative: n.id.clone(),
            label: format!("noise:{i}"),
            triplet: t,
        });
    }
    Ok(out)
}
