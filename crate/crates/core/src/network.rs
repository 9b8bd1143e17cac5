//! Narrative networks and their backbones.
//!
//! Nodes are arguments, edges are `A0 -frame-> A1` fragments weighted by
//! their log-odds score (or by frequency for the global network). The
//! disparity filter keeps edges that carry a disproportionate share of a
//! node's strength.
//!
//! Directed rule: an edge is tested at its source over out-edges and at its
//! target over in-edges, and is kept if either test passes. A node with a
//! single edge in the tested direction gives no test. An edge with no test
//! at either end is kept only when `alpha >= 0.5`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{NarrativeTriplet, TripletKey};
use crate::error::{Error, Result};
use crate::significance::{RankedFragment, Score};

/// Backbone significance levels used for the published networks.
pub const ALPHA_GLOBAL: f64 = 1e-7;
pub const ALPHA_LOCAL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub frame: String,
    pub weight: f64,
    pub support: u64,
    /// Added for display only; not a backbone member.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub forced: bool,
}

impl Edge {
    pub fn key(&self) -> TripletKey {
        TripletKey::new(&self.source, &self.frame, &self.target)
    }
}

/// A directed multigraph kept in canonical order: nodes sorted, edges sorted
/// by `(source, target, frame)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NarrativeNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

impl NarrativeNetwork {
    /// Sorts and deduplicates; rejects empty node names, duplicate edges and
    /// non-finite weights.
    pub fn new(mut nodes: Vec<String>, mut edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            nodes.push(e.source.clone());
            nodes.push(e.target.clone());
        }
        nodes.sort();
        nodes.dedup();
        if nodes.iter().any(String::is_empty) {
            return Err(Error::Invalid("empty node name".into()));
        }
        edges.sort_by(|a, b| (&a.source, &a.target, &a.frame).cmp(&(&b.source, &b.target, &b.frame)));
        for (i, w) in edges.windows(2).enumerate() {
            if (&w[0].source, &w[0].target, &w[0].frame) == (&w[1].source, &w[1].target, &w[1].frame) {
                return Err(Error::Invalid(format!("duplicate edge {} at {}", w[1].key(), i + 1)));
            }
        }
        if let Some(e) = edges.iter().find(|e| !e.weight.is_finite()) {
            return Err(Error::Invalid(format!("edge {} has weight {}", e.key(), e.weight)));
        }
        Ok(Self { nodes, edges })
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn find(&self, key: &TripletKey) -> Option<&Edge> {
        self.edges
            .binary_search_by(|e| (&e.source, &e.target, &e.frame).cmp(&(&key.a0, &key.a1, &key.frame)))
            .ok()
            .map(|i| &self.edges[i])
    }

    pub fn out_strength(&self, node: &str) -> f64 {
        self.edges.iter().filter(|e| e.source == node).map(|e| e.weight).sum()
    }

    /// Total degree (in plus out) per node, ignoring forced edges.
    pub fn degrees(&self) -> BTreeMap<&str, usize> {
        let mut d: BTreeMap<&str, usize> = self.nodes.iter().map(|n| (n.as_str(), 0)).collect();
        for e in self.edges.iter().filter(|e| !e.forced) {
            *d.get_mut(e.source.as_str()).expect("endpoint") += 1;
            *d.get_mut(e.target.as_str()).expect("endpoint") += 1;
        }
        d
    }
}

/// An edge candidate: a fragment, its weight and its frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTriplet {
    pub triplet: TripletKey,
    pub weight: f64,
    pub support: u64,
}

/// One edge per fragment with positive weight. Fragments with an empty
/// argument are skipped; repeated fragments are merged, keeping the largest
/// weight and summing support.
pub fn build_network(items: &[WeightedTriplet]) -> NarrativeNetwork {
    let mut merged: BTreeMap<(&str, &str, &str), (f64, u64)> = BTreeMap::new();
    for w in items {
        let k = &w.triplet;
        if !(w.weight > 0.0) || !w.weight.is_finite() || k.a0.is_empty() || k.a1.is_empty() {
            continue;
        }
        let e = merged.entry((&k.a0, &k.a1, &k.frame)).or_insert((w.weight, 0));
        e.0 = e.0.max(w.weight);
        e.1 += w.support;
    }
    let edges = merged
        .into_iter()
        .map(|((s, t, f), (weight, support))| Edge {
            source: s.to_string(),
            target: t.to_string(),
            frame: f.to_string(),
            weight,
            support,
            forced: false,
        })
        .collect();
    NarrativeNetwork::new(Vec::new(), edges).expect("filtered input is valid")
}

/// Local network of one frame from its log-odds scores.
pub fn local_network(scores: &[Score]) -> NarrativeNetwork {
    let items: Vec<WeightedTriplet> = scores
        .iter()
        .filter(|s| s.f_target > 0)
        .map(|s| WeightedTriplet {
            triplet: s.triplet.clone(),
            weight: s.s_w,
            support: s.f_target,
        })
        .collect();
    build_network(&items)
}

/// Global network over the whole corpus. With no reference slice the
/// log-odds score is undefined, so edges are weighted by frequency.
pub fn global_network(triplets: &[NarrativeTriplet]) -> NarrativeNetwork {
    let mut counts: BTreeMap<TripletKey, u64> = BTreeMap::new();
    for t in triplets {
        *counts.entry(t.key()).or_default() += 1;
    }
    let items: Vec<WeightedTriplet> = counts
        .into_iter()
        .map(|(triplet, n)| WeightedTriplet {
            triplet,
            weight: n as f64,
            support: n,
        })
        .collect();
    build_network(&items)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeAlpha {
    /// Test at the source over its out-edges; `None` when it has only one.
    pub alpha_out: Option<f64>,
    /// Test at the target over its in-edges; `None` when it has only one.
    pub alpha_in: Option<f64>,
    pub retained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneResult {
    pub alpha: f64,
    /// Per edge of the input network, in its order.
    pub tests: Vec<EdgeAlpha>,
    pub backbone: NarrativeNetwork,
}

impl BackboneResult {
    pub fn retained(&self) -> impl Iterator<Item = usize> + '_ {
        self.tests.iter().enumerate().filter(|(_, t)| t.retained).map(|(i, _)| i)
    }
}

/// `(1 - p)^(k - 1)`: the probability that a uniformly random split of a
/// node's strength over `k` edges gives some edge a share of at least `p`.
pub fn disparity_alpha(p: f64, k: usize) -> f64 {
    (1.0 - p).max(0.0).powi(k as i32 - 1)
}

/// Whether an edge with the given directional tests is kept at `alpha`.
pub fn keep_edge(alpha_out: Option<f64>, alpha_in: Option<f64>, alpha: f64) -> bool {
    match (alpha_out, alpha_in) {
        (None, None) => alpha >= 0.5,
        (o, i) => o.is_some_and(|a| a < alpha) || i.is_some_and(|a| a < alpha),
    }
}

/// Directional alphas for every edge, without thresholding.
pub fn edge_alphas(net: &NarrativeNetwork) -> Result<Vec<(Option<f64>, Option<f64>)>> {
    let mut out_s: HashMap<&str, (f64, usize)> = HashMap::new();
    let mut in_s: HashMap<&str, (f64, usize)> = HashMap::new();
    for (i, e) in net.edges.iter().enumerate() {
        if !(e.weight > 0.0) {
            return Err(Error::NonPositiveWeight(i));
        }
        let o = out_s.entry(&e.source).or_default();
        o.0 += e.weight;
        o.1 += 1;
        let n = in_s.entry(&e.target).or_default();
        n.0 += e.weight;
        n.1 += 1;
    }
    let test = |(s, k): (f64, usize), w: f64| (k > 1).then(|| disparity_alpha(w / s, k));
    Ok(net
        .edges
        .iter()
        .map(|e| (test(out_s[e.source.as_str()], e.weight), test(in_s[e.target.as_str()], e.weight)))
        .collect())
}

pub fn disparity_filter(net: &NarrativeNetwork, alpha: f64) -> Result<BackboneResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let alphas = edge_alphas(net)?;
    let tests: Vec<EdgeAlpha> = alphas
        .into_iter()
        .map(|(o, i)| EdgeAlpha {
            alpha_out: o,
            alpha_in: i,
            retained: keep_edge(o, i, alpha),
        })
        .collect();
    let edges = net
        .edges
        .iter()
        .zip(&tests)
        .filter(|(_, t)| t.retained)
        .map(|(e, _)| e.clone())
        .collect();
    let backbone = NarrativeNetwork::new(Vec::new(), edges)?;
    Ok(BackboneResult { alpha, tests, backbone })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HubClass {
    Plain,
    Minor,
    Major,
}

impl HubClass {
    pub fn as_str(self) -> &'static str {
        match self {
            HubClass::Plain => "plain",
            HubClass::Minor => "minor",
            HubClass::Major => "major",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HubThresholds {
    pub major: usize,
    pub minor: usize,
}

impl Default for HubThresholds {
    fn default() -> Self {
        Self { major: 10, minor: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hub {
    pub node: String,
    pub degree: usize,
    pub class: HubClass,
}

/// Degree classes for every node, in node order. Degree `>= major` is major,
/// `[minor, major)` is minor.
pub fn find_hubs(net: &NarrativeNetwork, th: HubThresholds) -> Vec<Hub> {
    net.degrees()
        .into_iter()
        .map(|(n, d)| Hub {
            node: n.to_string(),
            degree: d,
            class: if d >= th.major {
                HubClass::Major
            } else if d >= th.minor {
                HubClass::Minor
            } else {
                HubClass::Plain
            },
        })
        .collect()
}

/// How many of the top fragments survive as backbone edges.
pub fn overlap_report(backbone: &NarrativeNetwork, top: &[RankedFragment]) -> usize {
    top.iter()
        .filter(|f| backbone.find(&f.triplet).is_some_and(|e| !e.forced))
        .count()
}

/// Adds the top fragments missing from the backbone, marked as forced, so
/// they can be drawn alongside it.
pub fn with_forced_top(backbone: &NarrativeNetwork, full: &NarrativeNetwork, top: &[RankedFragment]) -> NarrativeNetwork {
    let mut edges = backbone.edges.clone();
    for f in top {
        if backbone.find(&f.triplet).is_none() {
            if let Some(e) = full.find(&f.triplet) {
                edges.push(Edge { forced: true, ..e.clone() });
            }
        }
    }
    NarrativeNetwork::new(backbone.nodes.clone(), edges).expect("subset of a valid network")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFormat {
    Dot,
    Graphml,
    #[default]
    Json,
}

impl GraphFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Dot => "dot",
            GraphFormat::Graphml => "graphml",
            GraphFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "graphml" => Ok(GraphFormat::Graphml),
            "json" => Ok(GraphFormat::Json),
            other => Err(Error::Config(format!("unknown graph format `{other}`"))),
        }
    }
}

/// Canonical JSON: nodes and edges in canonical order, stable float output.
pub fn export_json(net: &NarrativeNetwork) -> String {
    let mut s = serde_json::to_string_pretty(net).expect("network serialises");
    s.push('\n');
    s
}

/// Inverse of [`export_json`]; validates the graph.
pub fn import_json(text: &str) -> Result<NarrativeNetwork> {
    let raw: NarrativeNetwork = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("graph json: {e}")))?;
    let net = NarrativeNetwork::new(raw.nodes.clone(), raw.edges)?;
    if net.nodes != raw.nodes {
        return Err(Error::Invalid("node list must be sorted, unique and include every endpoint".into()));
    }
    Ok(net)
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn hub_colour(c: HubClass) -> &'static str {
    match c {
        HubClass::Major => "red",
        HubClass::Minor => "black",
        HubClass::Plain => "gray50",
    }
}

pub fn export_dot(net: &NarrativeNetwork, th: HubThresholds) -> String {
    let hubs = find_hubs(net, th);
    let mut s = String::from("digraph narratives {\n");
    for h in &hubs {
        let _ = writeln!(
            s,
            "  {} [label={}, hub={}, color={}];",
            dot_quote(&h.node),
            dot_quote(&h.node),
            h.class.as_str(),
            hub_colour(h.class)
        );
    }
    for e in &net.edges {
        let _ = writeln!(
            s,
            "  {} -> {} [label={}, weight={}, support={}{}];",
            dot_quote(&e.source),
            dot_quote(&e.target),
            dot_quote(&e.frame),
            e.weight,
            e.support,
            if e.forced { ", style=dashed, forced=true" } else { "" }
        );
    }
    s.push_str("}\n");
    s
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // characters XML 1.0 cannot carry at all
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => out.push('\u{fffd}'),
            c => out.push(c),
        }
    }
    out
}

pub fn export_graphml(net: &NarrativeNetwork, th: HubThresholds) -> String {
    let hubs = find_hubs(net, th);
    let index: HashMap<&str, usize> = net.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut s = String::from(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" ",
        "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" ",
        "xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns ",
        "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n",
        "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n",
        "  <key id=\"hub\" for=\"node\" attr.name=\"hub\" attr.type=\"string\"/>\n",
        "  <key id=\"degree\" for=\"node\" attr.name=\"degree\" attr.type=\"int\"/>\n",
        "  <key id=\"frame\" for=\"edge\" attr.name=\"frame\" attr.type=\"string\"/>\n",
        "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n",
        "  <key id=\"support\" for=\"edge\" attr.name=\"support\" attr.type=\"long\"/>\n",
        "  <key id=\"forced\" for=\"edge\" attr.name=\"forced\" attr.type=\"boolean\"/>\n",
        "  <graph id=\"narratives\" edgedefault=\"directed\">\n",
    ));
    for (i, h) in hubs.iter().enumerate() {
        let _ = writeln!(
            s,
            "    <node id=\"n{i}\"><data key=\"label\">{}</data><data key=\"hub\">{}</data><data key=\"degree\">{}</data></node>",
            xml_escape(&h.node),
            h.class.as_str(),
            h.degree
        );
    }
    for (i, e) in net.edges.iter().enumerate() {
        let _ = writeln!(
            s,
            "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\"><data key=\"frame\">{}</data><data key=\"weight\">{}</data><data key=\"support\">{}</data><data key=\"forced\">{}</data></edge>",
            index[e.source.as_str()],
            index[e.target.as_str()],
            xml_escape(&e.frame),
            e.weight,
            e.support,
            e.forced
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

pub fn export(net: &NarrativeNetwork, format: GraphFormat, th: HubThresholds) -> String {
    match format {
        GraphFormat::Dot => export_dot(net, th),
        GraphFormat::Graphml => export_graphml(net, th),
        GraphFormat::Json => export_json(net),
    }
}

/// Nodes reachable from `node` along out-edges, excluding itself.
pub fn successors<'a>(net: &'a NarrativeNetwork, node: &str) -> BTreeSet<&'a str> {
    net.edges.iter().filter(|e| e.source == node).map(|e| e.target.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wt(a0: &str, f: &str, a1: &str, w: f64) -> WeightedTriplet {
        WeightedTriplet {
            triplet: TripletKey::new(a0, f, a1),
            weight: w,
            support: 1,
        }
    }

    #[test]
    fn construction_rules() {
        assert!(build_network(&[]).is_empty());
        let net = build_network(&[wt("i", "LIKE", "x", 0.5), wt("i", "LIKE", "y", 0.2), wt("i", "HATE", "z", -0.3)]);
        assert_eq!(successors(&net, "i").into_iter().collect::<Vec<_>>(), ["x", "y"]);
        assert!((net.out_strength("i") - 0.7).abs() < 1e-12);
        assert!(net.find(&TripletKey::new("i", "HATE", "z")).is_none());
    }

    #[test]
    fn three_way_split() {
        let net = build_network(&[wt("h", "F", "a", 0.7), wt("h", "F", "b", 0.2), wt("h", "F", "c", 0.1)]);
        let alphas = edge_alphas(&net).unwrap();
        let expect = [0.09, 0.64, 0.81];
        for ((o, i), e) in alphas.iter().zip(expect) {
            assert!((o.unwrap() - e).abs() < 1e-12);
            assert!(i.is_none());
        }
        let bb = disparity_filter(&net, 0.1).unwrap();
        assert_eq!(bb.retained().collect::<Vec<_>>(), [0]);
    }

    #[test]
    fn lone_edge_convention() {
        let net = build_network(&[wt("a", "F", "b", 1.0)]);
        assert!(disparity_filter(&net, 0.01).unwrap().backbone.edges.is_empty());
        assert_eq!(disparity_filter(&net, 0.5).unwrap().backbone.edges.len(), 1);
    }

    #[test]
    fn hub_classes() {
        let items: Vec<_> = (0..12).map(|i| wt("c", "F", &format!("l{i:02}"), 1.0)).collect();
        let hubs = find_hubs(&build_network(&items), HubThresholds::default());
        assert_eq!(hubs.iter().find(|h| h.node == "c").unwrap().class, HubClass::Major);
        let items: Vec<_> = (0..7).map(|i| wt("c", "F", &format!("l{i}"), 1.0)).collect();
        let hubs = find_hubs(&build_network(&items), HubThresholds::default());
        assert_eq!(hubs.iter().find(|h| h.node == "c").unwrap().class, HubClass::Minor);
        let lone = NarrativeNetwork::new(vec!["x".into()], Vec::new()).unwrap();
        assert_eq!(find_hubs(&lone, HubThresholds::default())[0].class, HubClass::Plain);
    }

    #[test]
    fn json_round_trip() {
        let net = build_network(&[wt("a", "F", "b", 0.25)]);
        let text = export_json(&net);
        assert_eq!(import_json(&text).unwrap(), net);
        assert_eq!(export_json(&import_json(&text).unwrap()), text);
        assert!(import_json("{\"nodes\":[\"a\",\"a\"],\"edges\":[]}").is_err());
        assert!(import_json("{\"nodes\":[],\"edges\":[]}").unwrap().is_empty());
    }

    #[test]
    fn rejects_non_positive() {
        let mut net = build_network(&[wt("a", "F", "b", 0.25)]);
        net.edges[0].weight = 0.0;
        assert!(matches!(disparity_filter(&net, 0.1), Err(Error::NonPositiveWeight(0))));
    }
}
