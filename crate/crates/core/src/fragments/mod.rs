//! Narrative fragment aggregation.
//!
//! Three steps reduce the number of distinct triplets: verb senses are mapped
//! onto coarser frames, whole triplets (rendered `"A0 frame A1"`) are embedded
//! and clustered with BIRCH, and finally the A0/A1 arguments are clustered so
//! that surface variants collapse onto their most frequent form. Each step is
//! a quotient map, so the unique triplet count can only go down.

mod alt;
mod birch;
mod embed;

pub use alt::{alt_cluster, dbscan, kmeans, AltMethod, NOISE};
pub use birch::{birch_fit, BirchFit, Cf, CfTree};
pub use embed::*;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{NarrativeTriplet, TripletKey};
use crate::error::{Error, Result};

const BUNDLED_FRAMES: &str = include_str!("../../data/frames.tsv");

/// Default BIRCH radius threshold for unit-norm embeddings.
///
/// The radius of any set of unit vectors is at most 1, so thresholds of 1 or
/// more put everything into one cluster. 0.4 was picked on the synthetic
/// cluster runs.
pub const DEFAULT_THRESHOLD: f64 = 0.4;
pub const DEFAULT_BRANCHING: usize = 50;

/// Verb sense to frame table. Unknown senses map to themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrameMap {
    table: BTreeMap<String, String>,
}

impl FrameMap {
    /// Two tab-separated columns, `verb_sense  frame`; `#` starts a comment line.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t').map(str::trim);
            let (Some(sense), Some(frame), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::parse(n + 1, "expected two tab-separated columns"));
            };
            if sense.is_empty() || frame.is_empty() {
                return Err(Error::parse(n + 1, "empty verb sense or frame"));
            }
            if let Some(prev) = table.insert(sense.to_string(), frame.to_string()) {
                if prev != frame {
                    return Err(Error::parse(n + 1, format!("`{sense}` mapped to both {prev} and {frame}")));
                }
            }
        }
        Ok(Self { table })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }

    /// The desk-scale table shipped with the crate.
    pub fn bundled() -> &'static FrameMap {
        static MAP: OnceLock<FrameMap> = OnceLock::new();
        MAP.get_or_init(|| FrameMap::from_tsv(BUNDLED_FRAMES).expect("bundled frame map is valid"))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn frame_count(&self) -> usize {
        self.table.values().collect::<std::collections::BTreeSet<_>>().len()
    }

    pub fn frame_of<'a>(&'a self, sense: &'a str) -> &'a str {
        self.table.get(sense).map_or(sense, String::as_str)
    }

    pub fn render(&self) -> String {
        self.table.iter().map(|(s, f)| format!("{s}\t{f}\n")).collect()
    }
}

/// Sets the frame from the verb sense; arguments are untouched.
pub fn frame_map(triplet: &NarrativeTriplet, map: &FrameMap) -> NarrativeTriplet {
    let mut t = triplet.clone();
    t.frame = map.frame_of(&t.verb_sense).to_string();
    t
}

/// Distinct keys with their frequencies, in first-occurrence order.
pub fn aggregate<'a>(keys: impl IntoIterator<Item = &'a TripletKey>) -> Vec<(TripletKey, u64)> {
    let mut index: HashMap<&TripletKey, usize> = HashMap::new();
    let mut out: Vec<(TripletKey, u64)> = Vec::new();
    for k in keys {
        match index.get(k) {
            Some(&i) => out[i].1 += 1,
            None => {
                index.insert(k, out.len());
                out.push((k.clone(), 1));
            }
        }
    }
    out
}

pub fn unique_count(triplets: &[NarrativeTriplet]) -> usize {
    triplets.iter().map(NarrativeTriplet::key).collect::<std::collections::HashSet<_>>().len()
}

/// Most frequent member; ties go to the lexicographically smallest rendering.
pub fn choose_representative<'a, T: Ord>(members: impl IntoIterator<Item = (&'a T, u64)>) -> Option<&'a T>
where
    T: 'a,
{
    members
        .into_iter()
        .fold(None, |best: Option<(&T, u64)>, (t, c)| match best {
            Some((b, bc)) if bc > c || (bc == c && b <= t) => Some((b, bc)),
            _ => Some((t, c)),
        })
        .map(|(t, _)| t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub threshold: f64,
    pub branching: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            branching: DEFAULT_BRANCHING,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(Error::Config(format!("BIRCH threshold must be positive, got {}", self.threshold)));
        }
        if self.branching < 2 {
            return Err(Error::Config("BIRCH branching factor must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMember {
    pub triplet: TripletKey,
    pub count: u64,
    pub cluster_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub id: usize,
    pub representative: TripletKey,
    /// Distinct member triplets.
    pub unique: usize,
    /// Triplet occurrences.
    pub size: u64,
}

/// One line of the cluster model export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub triplet: String,
    pub cluster_id: usize,
    pub representative: String,
}

/// Result of clustering aggregated triplets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub threshold: f64,
    pub branching: usize,
    /// Members in first-occurrence (insertion) order.
    pub members: Vec<ClusterMember>,
    pub clusters: Vec<ClusterInfo>,
    #[serde(skip)]
    index: HashMap<TripletKey, usize>,
}

impl ClusterModel {
    fn build(cfg: &ClusterConfig, keys: Vec<(TripletKey, u64)>, labels: &[usize], n_clusters: usize) -> Self {
        let members: Vec<ClusterMember> = keys
            .into_iter()
            .zip(labels)
            .map(|((triplet, count), &cluster_id)| ClusterMember {
                triplet,
                count,
                cluster_id,
            })
            .collect();
        let mut by_cluster: Vec<Vec<&ClusterMember>> = vec![Vec::new(); n_clusters];
        for m in &members {
            by_cluster[m.cluster_id].push(m);
        }
        let clusters = by_cluster
            .iter()
            .enumerate()
            .map(|(id, ms)| {
                let rendered: Vec<(String, u64)> = ms.iter().map(|m| (m.triplet.render(), m.count)).collect();
                let best = choose_representative(rendered.iter().map(|(r, c)| (r, *c))).expect("clusters are non-empty");
                let pos = rendered.iter().position(|(r, _)| r == best).expect("present");
                ClusterInfo {
                    id,
                    representative: ms[pos].triplet.clone(),
                    unique: ms.len(),
                    size: ms.iter().map(|m| m.count).sum(),
                }
            })
            .collect();
        let mut model = Self {
            threshold: cfg.threshold,
            branching: cfg.branching,
            members,
            clusters,
            index: HashMap::new(),
        };
        model.reindex();
        model
    }

    fn reindex(&mut self) {
        self.index = self.members.iter().enumerate().map(|(i, m)| (m.triplet.clone(), i)).collect();
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_of(&self, key: &TripletKey) -> Option<usize> {
        self.index.get(key).map(|&i| self.members[i].cluster_id)
    }

    pub fn representative_of(&self, key: &TripletKey) -> Option<&TripletKey> {
        self.cluster_of(key).map(|c| &self.clusters[c].representative)
    }

    /// Replaces each triplet's `(A0, frame, A1)` by its cluster representative.
    /// Triplets unknown to the model are left alone.
    pub fn apply(&self, triplets: &[NarrativeTriplet]) -> Vec<NarrativeTriplet> {
        triplets
            .iter()
            .map(|t| {
                let mut t = t.clone();
                if let Some(rep) = self.representative_of(&t.key()) {
                    t.a0 = rep.a0.clone();
                    t.frame = rep.frame.clone();
                    t.a1 = rep.a1.clone();
                }
                t
            })
            .collect()
    }

    pub fn records(&self) -> Vec<ClusterRecord> {
        self.members
            .iter()
            .map(|m| ClusterRecord {
                triplet: m.triplet.render(),
                cluster_id: m.cluster_id,
                representative: self.clusters[m.cluster_id].representative.render(),
            })
            .collect()
    }

    /// Header line plus one JSON record per member.
    pub fn render_records(&self) -> String {
        let header = crate::format::Header::default()
            .with_flag("kind", "clusters")
            .with_flag("threshold", &self.threshold.to_string())
            .with_flag("clusters", &self.n_clusters().to_string());
        let mut out = header.render();
        out.push('\n');
        for r in self.records() {
            out.push_str(&serde_json::to_string(&r).expect("plain record"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cluster model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: ClusterModel =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("cluster model: {e}")))?;
        for m in &model.members {
            if m.cluster_id >= model.clusters.len() {
                return Err(Error::Invalid(format!("member `{}` has unknown cluster {}", m.triplet, m.cluster_id)));
            }
        }
        model.reindex();
        Ok(model)
    }
}

fn validate_vectors(vectors: &[Vec<f64>], dim: usize) -> Result<()> {
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    Ok(())
}

/// Clusters distinct `(A0, frame, A1)` keys, inserting them into the CF tree
/// in first-occurrence order weighted by frequency.
pub fn cluster_triplets(
    triplets: &[NarrativeTriplet],
    src: &EmbeddingSource,
    cfg: &ClusterConfig,
) -> Result<ClusterModel> {
    cfg.validate()?;
    let keys: Vec<TripletKey> = triplets.iter().map(NarrativeTriplet::key).collect();
    let agg = aggregate(&keys);
    if agg.is_empty() {
        return Ok(ClusterModel::build(cfg, agg, &[], 0));
    }
    let texts: Vec<String> = agg.iter().map(|(k, _)| k.render()).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let vectors = src.embed(&refs)?;
    validate_vectors(&vectors, src.dim())?;
    let weights: Vec<f64> = agg.iter().map(|(_, c)| *c as f64).collect();
    let fit = birch_fit(&vectors, Some(&weights), cfg.threshold, cfg.branching);
    Ok(ClusterModel::build(cfg, agg, &fit.labels, fit.n_clusters))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgumentMode {
    /// A0 and A1 strings share one clustering.
    #[default]
    Joint,
    /// A0 and A1 are clustered independently.
    Separate,
}

/// Canonical surface forms for arguments. Unlisted strings map to themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentMap {
    pub a0: BTreeMap<String, String>,
    pub a1: BTreeMap<String, String>,
}

impl ArgumentMap {
    pub fn canonical_a0<'a>(&'a self, s: &'a str) -> &'a str {
        self.a0.get(s).map_or(s, String::as_str)
    }

    pub fn canonical_a1<'a>(&'a self, s: &'a str) -> &'a str {
        self.a1.get(s).map_or(s, String::as_str)
    }

    pub fn apply(&self, triplets: &[NarrativeTriplet]) -> Vec<NarrativeTriplet> {
        triplets
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.a0 = self.canonical_a0(&t.a0).to_string();
                t.a1 = self.canonical_a1(&t.a1).to_string();
                t
            })
            .collect()
    }
}

/// Clusters argument strings and maps each to its cluster's most frequent
/// form. Only strings that actually change are stored.
fn canonical_forms(
    args: &[&str],
    src: &EmbeddingSource,
    cfg: &ClusterConfig,
) -> Result<BTreeMap<String, String>> {
    let mut order: Vec<(&str, u64)> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for &a in args {
        match index.get(a) {
            Some(&i) => order[i].1 += 1,
            None => {
                index.insert(a, order.len());
                order.push((a, 1));
            }
        }
    }
    if order.is_empty() {
        return Ok(BTreeMap::new());
    }
    let texts: Vec<&str> = order.iter().map(|(s, _)| *s).collect();
    let vectors = src.embed(&texts)?;
    validate_vectors(&vectors, src.dim())?;
    let weights: Vec<f64> = order.iter().map(|(_, c)| *c as f64).collect();
    let fit = birch_fit(&vectors, Some(&weights), cfg.threshold, cfg.branching);
    let mut groups: Vec<Vec<(&str, u64)>> = vec![Vec::new(); fit.n_clusters];
    for (&(s, c), &l) in order.iter().zip(&fit.labels) {
        groups[l].push((s, c));
    }
    let mut map = BTreeMap::new();
    for g in &groups {
        let rep = *choose_representative(g.iter().map(|(s, c)| (s, *c))).expect("non-empty");
        for &(s, _) in g {
            if s != rep {
                map.insert(s.to_string(), rep.to_string());
            }
        }
    }
    Ok(map)
}

pub fn cluster_arguments(
    triplets: &[NarrativeTriplet],
    src: &EmbeddingSource,
    cfg: &ClusterConfig,
    mode: ArgumentMode,
) -> Result<ArgumentMap> {
    cfg.validate()?;
    match mode {
        ArgumentMode::Joint => {
            let args: Vec<&str> = triplets.iter().flat_map(|t| [t.a0.as_str(), t.a1.as_str()]).collect();
            let map = canonical_forms(&args, src, cfg)?;
            Ok(ArgumentMap { a0: map.clone(), a1: map })
        }
        ArgumentMode::Separate => {
            let a0: Vec<&str> = triplets.iter().map(|t| t.a0.as_str()).collect();
            let a1: Vec<&str> = triplets.iter().map(|t| t.a1.as_str()).collect();
            Ok(ArgumentMap {
                a0: canonical_forms(&a0, src, cfg)?,
                a1: canonical_forms(&a1, src, cfg)?,
            })
        }
    }
}

/// Unique triplet counts after each aggregation step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationCounts {
    pub raw: usize,
    pub frame_mapped: usize,
    pub triplet_clustered: usize,
    pub argument_clustered: usize,
}

#[derive(Clone, Debug)]
pub struct Aggregation {
    pub model: ClusterModel,
    pub arguments: ArgumentMap,
    /// Input triplets after all three steps, in input order.
    pub triplets: Vec<NarrativeTriplet>,
    pub counts: AggregationCounts,
}

/// Frame mapping, triplet clustering and argument clustering in sequence.
pub fn aggregate_fragments(
    triplets: &[NarrativeTriplet],
    frames: &FrameMap,
    src: &EmbeddingSource,
    cfg: &ClusterConfig,
    mode: ArgumentMode,
) -> Result<Aggregation> {
    let raw = unique_count(triplets);
    let mapped: Vec<NarrativeTriplet> = triplets.iter().map(|t| frame_map(t, frames)).collect();
    let frame_mapped = unique_count(&mapped);
    let model = cluster_triplets(&mapped, src, cfg)?;
    let clustered = model.apply(&mapped);
    let triplet_clustered = unique_count(&clustered);
    let arguments = cluster_arguments(&clustered, src, cfg, mode)?;
    let out = arguments.apply(&clustered);
    let argument_clustered = unique_count(&out);
    Ok(Aggregation {
        model,
        arguments,
        triplets: out,
        counts: AggregationCounts {
            raw,
            frame_mapped,
            triplet_clustered,
            argument_clustered,
        },
    })
}
