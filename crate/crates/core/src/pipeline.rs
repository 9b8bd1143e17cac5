//! End-to-end batch runs driven by one TOML config.
//!
//! Each stage reads its inputs from files (the configured inputs or earlier
//! stages' outputs inside the run directory) and writes its outputs there.
//! A stage's input hash covers its own settings and the bytes of every file
//! it reads; when the manifest already holds the same hash and the recorded
//! outputs are intact, the stage is skipped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::changepoint::{detect_tree, featurize, ClassifierConfig, SegmentTree, SignificanceConfig, TreeConfig};
use crate::corpus::{
    build_vocabulary, parse_documents, parse_triplets, render_documents, render_triplets, Corpus, NarrativeTriplet,
    DEFAULT_VOCAB_SIZE,
};
use crate::error::{Error, Result};
use crate::format::Header;
use crate::fragments::{
    aggregate_fragments, parse_vectors, ArgumentMode, ClusterConfig, EmbeddingSource, FrameMap,
};
use crate::network::{
    disparity_filter, export, global_network, import_json, local_network, overlap_report, with_forced_top,
    GraphFormat, HubThresholds, NarrativeNetwork, ALPHA_GLOBAL, ALPHA_LOCAL,
};
use crate::significance::{frame_scores, rankings_csv, FrameRanking, RankConfig, Scheme};
use crate::synthgen::{extract_triplets, sentences, Lexicon};
use crate::write_file;

pub const STAGES: [&str; 6] = ["ingest", "detect", "cluster", "rank", "network", "export"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub docs: PathBuf,
    /// Triplets file; without one the built-in pattern extractor is used.
    pub triplets: Option<PathBuf>,
    /// External embedding file; without one the hashed n-gram embedder is used.
    pub vectors: Option<PathBuf>,
    pub frame_map: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangepointSettings {
    pub max_depth: usize,
    pub min_days: usize,
    pub vocab_size: usize,
    pub classifier: ClassifierConfig,
    pub significance: SignificanceConfig,
}

impl Default for ChangepointSettings {
    fn default() -> Self {
        let tree = TreeConfig::default();
        Self {
            max_depth: tree.max_depth,
            min_days: tree.min_days,
            vocab_size: DEFAULT_VOCAB_SIZE,
            classifier: ClassifierConfig::default(),
            significance: SignificanceConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSettings {
    pub threshold: f64,
    pub branching: usize,
    pub arguments: ArgumentMode,
    /// Expected dimension of an external vectors file.
    pub dim: Option<usize>,
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        let c = ClusterConfig::default();
        Self {
            threshold: c.threshold,
            branching: c.branching,
            arguments: ArgumentMode::Joint,
            dim: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSettings {
    #[serde(flatten)]
    pub rank: RankConfig,
    /// Document metadata key naming the sub-corpus, for the contrast scheme.
    pub tag_key: String,
}

impl Default for RankSettings {
    fn default() -> Self {
        Self {
            rank: RankConfig::default(),
            tag_key: "corpus".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub alpha_global: f64,
    pub alpha_local: f64,
    pub hubs: HubThresholds,
    /// Count hub degree on the backbone (default) or on the full network.
    pub hubs_on_backbone: bool,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        Self {
            alpha_global: ALPHA_GLOBAL,
            alpha_local: ALPHA_LOCAL,
            hubs: HubThresholds::default(),
            hubs_on_backbone: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSettings {
    pub formats: Vec<GraphFormat>,
}

impl Default for ExportSettings {
    fn default() -> Self {
        Self {
            formats: vec![GraphFormat::Json, GraphFormat::Dot, GraphFormat::Graphml],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub changepoint: ChangepointSettings,
    pub clustering: ClusteringSettings,
    pub significance: RankSettings,
    pub network: NetworkSettings,
    pub export: ExportSettings,
}

impl PipelineConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.docs);
        fix(&mut self.paths.out);
        for p in [&mut self.paths.triplets, &mut self.paths.vectors, &mut self.paths.frame_map]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.paths;
        if p.docs.as_os_str().is_empty() {
            return Err(Error::Config("paths.docs is required".into()));
        }
        if p.out.as_os_str().is_empty() {
            return Err(Error::Config("paths.out is required".into()));
        }
        for path in std::iter::once(&p.docs).chain([&p.triplets, &p.vectors, &p.frame_map].into_iter().flatten()) {
            if !path.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", path.display())));
            }
        }
        let cp = &self.changepoint;
        if cp.max_depth == 0 || cp.min_days == 0 || cp.vocab_size == 0 {
            return Err(Error::Config("changepoint max_depth, min_days and vocab_size must be positive".into()));
        }
        cp.classifier.validate()?;
        self.cluster_config().validate()?;
        if self.significance.rank.k == 0 {
            return Err(Error::Config("significance k must be at least 1".into()));
        }
        let n = &self.network;
        for a in [n.alpha_global, n.alpha_local] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Config(format!("network alpha must lie in (0, 1), got {a}")));
            }
        }
        if n.hubs.minor > n.hubs.major {
            return Err(Error::Config("hub minor threshold exceeds major".into()));
        }
        Ok(())
    }

    fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            threshold: self.clustering.threshold,
            branching: self.clustering.branching,
        }
    }

    fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            seed: self.seed,
            ..self.changepoint.classifier.clone()
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub input_hash: String,
    /// Output path (relative to the run directory) to content hash.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    pub fn read(dir: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(dir.join(Self::FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub stages: Vec<(&'static str, StageStatus)>,
}

/// State shared by the stages of one run.
struct Run<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    manifest: RunManifest,
    previous: Option<RunManifest>,
    report: Vec<(&'static str, StageStatus)>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Run<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn intact(&self, record: &StageRecord) -> bool {
        record
            .outputs
            .iter()
            .all(|(rel, hash)| std::fs::read(self.path(rel)).is_ok_and(|b| sha256_hex(&b) == *hash))
    }

    /// Runs `body` unless the previous manifest shows identical inputs and
    /// intact outputs. `body` returns the files it wrote, relative to the run
    /// directory.
    fn stage(
        &mut self,
        name: &'static str,
        settings: &impl Serialize,
        inputs: &[PathBuf],
        body: impl FnOnce(&Self) -> Result<Vec<(String, Vec<u8>)>>,
    ) -> Result<()> {
        let tag = |e: Error| Error::Stage {
            stage: name,
            source: Box::new(e),
        };
        let mut h = Sha256::new();
        h.update(name.as_bytes());
        h.update(serde_json::to_vec(settings).expect("settings serialise"));
        for p in inputs {
            h.update(sha256_hex(&read_bytes(p).map_err(tag)?).as_bytes());
        }
        let input_hash = hex::encode(h.finalize());
        if let Some(prev) = self.previous.as_ref().and_then(|m| m.stages.get(name)) {
            if prev.input_hash == input_hash && self.intact(prev) {
                self.manifest.stages.insert(name.to_string(), prev.clone());
                self.report.push((name, StageStatus::Skipped));
                return Ok(());
            }
        }
        let files = body(self).map_err(tag)?;
        let mut outputs = BTreeMap::new();
        for (rel, bytes) in files {
            write_file(&self.path(&rel), &bytes).map_err(tag)?;
            outputs.insert(rel, sha256_hex(&bytes));
        }
        self.manifest.stages.insert(name.to_string(), StageRecord { input_hash, outputs });
        write_file(&self.path(RunManifest::FILE), self.manifest.to_json().as_bytes()).map_err(tag)?;
        self.report.push((name, StageStatus::Ran));
        Ok(())
    }
}

const DOCS: &str = "ingest/documents.nfv1";
const TRIPLETS: &str = "ingest/triplets.nfv1";
const INGEST_REPORT: &str = "ingest/report.json";
const TREE: &str = "detect/segment_tree.json";
const AGGREGATED: &str = "cluster/triplets.nfv1";
const MODEL: &str = "cluster/cluster_model.json";
const RECORDS: &str = "cluster/clusters.nfv1";
const ARGS: &str = "cluster/arguments.json";
const COUNTS: &str = "cluster/counts.json";
const RANKINGS: &str = "rank/rankings.json";
const RANKINGS_CSV: &str = "rank/rankings.csv";
const GLOBAL_FULL: &str = "network/global_full.json";
const GLOBAL_BACKBONE: &str = "network/global_backbone.json";
const OVERLAP: &str = "network/overlap.csv";

fn frame_file(i: usize, kind: &str) -> String {
    format!("network/frame_{i:02}_{kind}.json")
}

#[derive(Serialize, Deserialize)]
struct IngestReport {
    documents: usize,
    triplets: usize,
    triplet_source: String,
    warnings: Vec<String>,
}

/// Reads the documents, and the triplets when given (or extracts them),
/// validates references and writes normalised copies.
pub fn ingest(docs_text: &str, triplets_text: Option<&str>) -> Result<(Corpus, Vec<NarrativeTriplet>, Vec<String>)> {
    let parsed = parse_documents(docs_text)?;
    let mut warnings = parsed.warnings;
    let corpus = Corpus::new(parsed.records)?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut triplets = match triplets_text {
        Some(text) => {
            let p = parse_triplets(text)?;
            warnings.extend(p.warnings);
            p.records
        }
        None => builtin_triplets(&corpus),
    };
    corpus.attach(&mut triplets)?;
    Ok((corpus, triplets, warnings))
}

/// Triplets from the built-in pattern extractor, one pass per sentence.
pub fn builtin_triplets(corpus: &Corpus) -> Vec<NarrativeTriplet> {
    let lex = Lexicon::bundled();
    let mut out = Vec::new();
    for d in corpus.docs() {
        for s in sentences(&d.text) {
            for mut t in extract_triplets(lex, s) {
                t.doc_id = d.id.clone();
                out.push(t);
            }
        }
    }
    out
}

fn load_triplets(run: &Run, rel: &str) -> Result<Vec<NarrativeTriplet>> {
    let corpus = load_corpus(run)?;
    let mut t = parse_triplets(&read_text(&run.path(rel))?)?.records;
    corpus.attach(&mut t)?;
    Ok(t)
}

fn load_corpus(run: &Run) -> Result<Corpus> {
    Corpus::new(parse_documents(&read_text(&run.path(DOCS))?)?.records)
}

fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serialises");
    b.push(b'\n');
    b
}

fn leaves(run: &Run) -> Result<Vec<crate::changepoint::Segment>> {
    Ok(SegmentTree::from_json(&read_text(&run.path(TREE))?)?.leaves())
}

fn tags(run: &Run) -> Result<Option<std::collections::HashMap<String, String>>> {
    Ok(match run.cfg.significance.rank.scheme {
        Scheme::ContrastCorpus { .. } => Some(load_corpus(run)?.meta_index(&run.cfg.significance.tag_key)),
        Scheme::PreviousFrame => None,
    })
}

/// Runs every stage, skipping those whose inputs are unchanged.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    run_stages(cfg, &STAGES)
}

/// Runs the named stages in pipeline order. Earlier stages' outputs must
/// already be in the run directory.
pub fn run_stages(cfg: &PipelineConfig, only: &[&str]) -> Result<RunReport> {
    cfg.validate()?;
    for s in only {
        if !STAGES.contains(s) {
            return Err(Error::Config(format!("unknown stage `{s}`")));
        }
    }
    let dir = cfg.paths.out.clone();
    // where the run lands does not change what it contains
    let mut hashed = cfg.clone();
    hashed.paths.out = PathBuf::new();
    let config_json = serde_json::to_vec(&hashed).expect("config serialises");
    let previous = RunManifest::read(&dir);
    let mut run = Run {
        cfg,
        manifest: RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(&config_json),
            seed: cfg.seed,
            stages: previous.as_ref().map(|m| m.stages.clone()).unwrap_or_default(),
        },
        previous,
        dir,
        report: Vec::new(),
    };
    let wants = |s: &str| only.contains(&s);

    if wants("ingest") {
        let mut inputs = vec![cfg.paths.docs.clone()];
        inputs.extend(cfg.paths.triplets.clone());
        run.stage("ingest", &"v1", &inputs, |_| {
            let docs_text = read_text(&cfg.paths.docs)?;
            let trip_text = cfg.paths.triplets.as_deref().map(read_text).transpose()?;
            let (corpus, triplets, warnings) = ingest(&docs_text, trip_text.as_deref())?;
            let report = IngestReport {
                documents: corpus.len(),
                triplets: triplets.len(),
                triplet_source: if cfg.paths.triplets.is_some() { "file" } else { "builtin" }.into(),
                warnings,
            };
            Ok(vec![
                (DOCS.into(), render_documents(&Header::default(), corpus.docs()).into_bytes()),
                (TRIPLETS.into(), render_triplets(&Header::default(), &triplets).into_bytes()),
                (INGEST_REPORT.into(), json_bytes(&report)),
            ])
        })?;
    }

    if wants("detect") {
        let settings = (&cfg.changepoint, cfg.seed);
        run.stage("detect", &settings, &[run.path(DOCS)], |run| {
            let corpus = load_corpus(run)?;
            let vocab = build_vocabulary(corpus.docs(), cfg.changepoint.vocab_size)?;
            let obs = featurize(corpus.docs(), &vocab);
            let tree = detect_tree(
                &obs,
                &cfg.classifier(),
                &cfg.changepoint.significance,
                &TreeConfig {
                    max_depth: cfg.changepoint.max_depth,
                    min_days: cfg.changepoint.min_days,
                },
            )?;
            Ok(vec![(TREE.into(), tree.to_json().into_bytes())])
        })?;
    }

    if wants("cluster") {
        let mut inputs = vec![run.path(DOCS), run.path(TRIPLETS)];
        inputs.extend(cfg.paths.vectors.clone());
        inputs.extend(cfg.paths.frame_map.clone());
        run.stage("cluster", &cfg.clustering, &inputs, |run| {
            let triplets = load_triplets(run, TRIPLETS)?;
            let frames = match &cfg.paths.frame_map {
                Some(p) => FrameMap::read(p)?,
                None => FrameMap::bundled().clone(),
            };
            let src = match &cfg.paths.vectors {
                Some(p) => EmbeddingSource::external(parse_vectors(&read_bytes(p)?)?, cfg.clustering.dim)?,
                None => EmbeddingSource::default(),
            };
            let agg = aggregate_fragments(&triplets, &frames, &src, &cfg.cluster_config(), cfg.clustering.arguments)?;
            Ok(vec![
                (AGGREGATED.into(), render_triplets(&Header::default(), &agg.triplets).into_bytes()),
                (MODEL.into(), agg.model.to_json().into_bytes()),
                (RECORDS.into(), agg.model.render_records().into_bytes()),
                (ARGS.into(), json_bytes(&agg.arguments)),
                (COUNTS.into(), json_bytes(&agg.counts)),
            ])
        })?;
    }

    if wants("rank") {
        let inputs = [run.path(DOCS), run.path(TREE), run.path(AGGREGATED)];
        run.stage("rank", &cfg.significance, &inputs, |run| {
            let rankings = rank(run)?;
            Ok(vec![
                (RANKINGS.into(), json_bytes(&rankings)),
                (RANKINGS_CSV.into(), rankings_csv(&rankings)?.into_bytes()),
            ])
        })?;
    }

    if wants("network") {
        let inputs = [run.path(DOCS), run.path(TREE), run.path(AGGREGATED), run.path(RANKINGS)];
        let settings = (&cfg.network, &cfg.significance);
        run.stage("network", &settings, &inputs, |run| network_stage(run))?;
    }

    if wants("export") {
        let mut inputs = vec![run.path(RANKINGS), run.path(GLOBAL_FULL), run.path(GLOBAL_BACKBONE)];
        let n_frames = read_rankings(&run)?.len();
        for i in 0..n_frames {
            inputs.push(run.path(&frame_file(i, "full")));
            inputs.push(run.path(&frame_file(i, "backbone")));
        }
        let settings = (&cfg.export, &cfg.network);
        run.stage("export", &settings, &inputs, |run| export_stage(run, n_frames))?;
    }

    Ok(RunReport {
        dir: run.dir,
        stages: run.report,
    })
}

fn rank(run: &Run) -> Result<Vec<FrameRanking>> {
    let frames = leaves(run)?;
    let triplets = load_triplets(run, AGGREGATED)?;
    let cfg = &run.cfg.significance.rank;
    let scores = frame_scores(&frames, &triplets, cfg, tags(run)?.as_ref())?;
    Ok(crate::significance::rankings_from_scores(&frames, scores, cfg.k))
}

fn read_rankings(run: &Run) -> Result<Vec<FrameRanking>> {
    serde_json::from_str(&read_text(&run.path(RANKINGS))?).map_err(|e| Error::Invalid(format!("rankings: {e}")))
}

fn network_stage(run: &Run) -> Result<Vec<(String, Vec<u8>)>> {
    let cfg = run.cfg;
    let frames = leaves(run)?;
    let triplets = load_triplets(run, AGGREGATED)?;
    let rankings = read_rankings(run)?;
    let scores = frame_scores(&frames, &triplets, &cfg.significance.rank, tags(run)?.as_ref())?;
    let mut files = Vec::new();
    let global = global_network(&triplets);
    let global_bb = disparity_filter(&global, cfg.network.alpha_global)?.backbone;
    files.push((GLOBAL_FULL.to_string(), crate::network::export_json(&global).into_bytes()));
    files.push((GLOBAL_BACKBONE.to_string(), crate::network::export_json(&global_bb).into_bytes()));
    let mut overlap = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    overlap
        .write_record(["frame", "frame_start", "frame_end", "top_k", "overlap", "backbone_edges", "full_edges"])
        .map_err(csv_err)?;
    for (i, (s, r)) in scores.iter().zip(&rankings).enumerate() {
        let full = local_network(s);
        let bb = disparity_filter(&full, cfg.network.alpha_local)?.backbone;
        overlap
            .write_record([
                i.to_string(),
                crate::corpus::format_timestamp(r.frame.start),
                crate::corpus::format_timestamp(r.frame.end),
                r.fragments.len().to_string(),
                overlap_report(&bb, &r.fragments).to_string(),
                bb.edges.len().to_string(),
                full.edges.len().to_string(),
            ])
            .map_err(csv_err)?;
        files.push((frame_file(i, "full"), crate::network::export_json(&full).into_bytes()));
        files.push((frame_file(i, "backbone"), crate::network::export_json(&bb).into_bytes()));
    }
    files.push((
        OVERLAP.to_string(),
        overlap.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?,
    ));
    Ok(files)
}

fn export_stage(run: &Run, n_frames: usize) -> Result<Vec<(String, Vec<u8>)>> {
    let cfg = run.cfg;
    let load = |rel: &str| -> Result<NarrativeNetwork> { import_json(&read_text(&run.path(rel))?) };
    let rankings = read_rankings(run)?;
    let hubs = cfg.network.hubs;
    let mut graphs: Vec<(String, NarrativeNetwork)> = Vec::new();
    let global_full = load(GLOBAL_FULL)?;
    let global_bb = load(GLOBAL_BACKBONE)?;
    graphs.push(("global".into(), if cfg.network.hubs_on_backbone { global_bb } else { global_full }));
    for i in 0..n_frames {
        let full = load(&frame_file(i, "full"))?;
        let bb = load(&frame_file(i, "backbone"))?;
        let shown = if cfg.network.hubs_on_backbone {
            with_forced_top(&bb, &full, &rankings[i].fragments)
        } else {
            full
        };
        graphs.push((format!("frame_{i:02}"), shown));
    }
    let mut files = Vec::new();
    for (name, g) in &graphs {
        for &f in &cfg.export.formats {
            files.push((format!("export/{name}.{}", f.extension()), export(g, f, hubs).into_bytes()));
        }
    }
    Ok(files)
}
