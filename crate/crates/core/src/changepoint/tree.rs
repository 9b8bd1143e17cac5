use serde::{Deserialize, Serialize};

use super::{detect_segment, ClassifierConfig, Observation, Segment, SignificanceConfig};
use crate::corpus::Timestamp;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_days: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_days: 4,
        }
    }
}

/// One time frame of the hierarchy. A node with a `tau` has exactly two
/// children `[start, tau)` and `[tau, end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentNode {
    pub start: Timestamp,
    pub end: Timestamp,
    pub level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<SegmentNode>,
}

impl SegmentNode {
    fn leaf(segment: Segment, level: usize) -> Self {
        Self {
            start: segment.start,
            end: segment.end,
            level,
            tau: None,
            gain: None,
            threshold: None,
            children: Vec::new(),
        }
    }

    pub fn segment(&self) -> Segment {
        Segment::new(self.start, self.end)
    }

    fn collect_leaves(&self, out: &mut Vec<Segment>) {
        if self.children.is_empty() {
            out.push(self.segment());
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    fn collect_changes(&self, out: &mut Vec<ChangePoint>) {
        if let (Some(tau), Some(gain)) = (self.tau, self.gain) {
            out.push(ChangePoint {
                tau,
                level: self.level,
                gain,
            });
        }
        for c in &self.children {
            c.collect_changes(out);
        }
    }

    fn check(&self) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::Invalid(format!("empty segment [{}, {})", self.start, self.end)));
        }
        if self.level == 0 {
            return Err(Error::Invalid("segment levels start at 1".into()));
        }
        if self.gain.is_some_and(|g| !g.is_finite()) || self.threshold.is_some_and(|g| !g.is_finite()) {
            return Err(Error::Invalid("non-finite gain or threshold".into()));
        }
        match (self.tau, self.children.as_slice()) {
            (None, []) => Ok(()),
            (Some(tau), [l, r]) => {
                let ok = l.start == self.start
                    && l.end == tau
                    && r.start == tau
                    && r.end == self.end
                    && l.level == self.level + 1
                    && r.level == self.level + 1;
                if !ok {
                    return Err(Error::Invalid(format!(
                        "children of [{}, {}) do not partition it at {tau}",
                        self.start, self.end
                    )));
                }
                l.check()?;
                r.check()
            }
            _ => Err(Error::Invalid("a node needs a tau and two children, or neither".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub tau: Timestamp,
    pub level: usize,
    pub gain: f64,
}

/// Hierarchy of time frames found by recursive change point detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentTree {
    pub root: SegmentNode,
}

impl SegmentTree {
    /// Leaf time frames in chronological order.
    pub fn leaves(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// Accepted change points, sorted by time.
    pub fn change_points(&self) -> Vec<ChangePoint> {
        let mut out = Vec::new();
        self.root.collect_changes(&mut out);
        out.sort_by_key(|c| c.tau);
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("segment tree serializes");
        s.push('\n');
        s
    }

    /// Parses and validates an event-tree file.
    pub fn from_json(text: &str) -> Result<Self> {
        let tree: SegmentTree =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        tree.root.check()?;
        Ok(tree)
    }
}

/// Recursively splits the corpus on significant change points.
///
/// Recursion stops at `max_depth` levels, at segments shorter than
/// `2 * min_days` days, or when no boundary is significant.
pub fn detect_tree(
    data: &[Observation],
    cfg: &ClassifierConfig,
    sig: &SignificanceConfig,
    tree_cfg: &TreeConfig,
) -> Result<SegmentTree> {
    cfg.validate()?;
    let root = Segment::covering(data).ok_or(Error::EmptyCorpus)?;
    Ok(SegmentTree {
        root: grow(data, root, 1, cfg, sig, tree_cfg)?,
    })
}

fn grow(
    data: &[Observation],
    segment: Segment,
    level: usize,
    cfg: &ClassifierConfig,
    sig: &SignificanceConfig,
    tree_cfg: &TreeConfig,
) -> Result<SegmentNode> {
    let mut node = SegmentNode::leaf(segment, level);
    if level > tree_cfg.max_depth || segment.days() < 2 * tree_cfg.min_days as i64 {
        return Ok(node);
    }
    let Some(found) = detect_segment(data, segment, cfg, sig, tree_cfg.min_days)? else {
        return Ok(node);
    };
    node.tau = Some(found.tau);
    node.gain = Some(found.gain);
    node.threshold = Some(found.threshold);
    node.children = vec![
        grow(data, Segment::new(segment.start, found.tau), level + 1, cfg, sig, tree_cfg)?,
        grow(data, Segment::new(found.tau, segment.end), level + 1, cfg, sig, tree_cfg)?,
    ];
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(start: i64, end: i64, level: usize) -> SegmentNode {
        SegmentNode::leaf(Segment::new(start, end), level)
    }

    #[test]
    fn json_roundtrip_and_leaves() {
        let mut root = node(0, 10, 1);
        root.tau = Some(4);
        root.gain = Some(0.2);
        root.threshold = Some(0.01);
        root.children = vec![node(0, 4, 2), node(4, 10, 2)];
        let tree = SegmentTree { root };
        let back = SegmentTree::from_json(&tree.to_json()).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.leaves(), vec![Segment::new(0, 4), Segment::new(4, 10)]);
        assert_eq!(back.change_points().len(), 1);
    }

    #[test]
    fn rejects_gapped_children() {
        let mut root = node(0, 10, 1);
        root.tau = Some(4);
        root.gain = Some(0.2);
        root.children = vec![node(0, 3, 2), node(4, 10, 2)];
        let text = serde_json::to_string(&SegmentTree { root }).unwrap();
        assert!(SegmentTree::from_json(&text).is_err());
        assert!(SegmentTree::from_json("{\"root\":{\"start\":5,\"end\":5,\"level\":1}}").is_err());
    }
}
