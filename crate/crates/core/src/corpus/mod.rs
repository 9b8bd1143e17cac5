//! Documents, narrative triplets, tokenization and TF-IDF features.

mod io;
mod tokenize;
mod vector;
mod vocab;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use io::{
    format_timestamp,
    parse_documents, parse_timestamp, parse_triplets, read_documents, read_triplets,
    render_documents, render_triplets, write_documents, write_triplets, Parsed,
};
pub use tokenize::tokenize;
pub use vector::FeatureVector;
pub use vocab::{build_vocabulary, tfidf_text, tfidf_transform, Vocabulary, DEFAULT_VOCAB_SIZE};

use crate::error::{Error, Result};

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Start of the UTC day containing `ts`.
pub fn day_floor(ts: Timestamp) -> Timestamp {
    ts.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub timestamp: Timestamp,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, timestamp: Timestamp, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            timestamp,
            text: text.into(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}

/// One (agent, action, patient) narrative fragment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NarrativeTriplet {
    pub a0: String,
    pub verb_sense: String,
    /// Verb frame; empty until a frame map has been applied.
    #[serde(default)]
    pub frame: String,
    pub a1: String,
    pub doc_id: String,
    /// Copied from the source document by [`Corpus::attach`].
    #[serde(default)]
    pub timestamp: Timestamp,
}

impl NarrativeTriplet {
    pub fn new(doc_id: &str, a0: &str, verb_sense: &str, a1: &str) -> Self {
        Self {
            a0: a0.to_string(),
            verb_sense: verb_sense.to_string(),
            frame: String::new(),
            a1: a1.to_string(),
            doc_id: doc_id.to_string(),
            timestamp: 0,
        }
    }

    /// The frame if mapped, otherwise the verb sense.
    pub fn action(&self) -> &str {
        if self.frame.is_empty() {
            &self.verb_sense
        } else {
            &self.frame
        }
    }

    /// `"A0 action A1"` with single spaces, the sentence form used for embedding.
    pub fn render(&self) -> String {
        format!("{} {} {}", self.a0, self.action(), self.a1)
    }

    pub fn key(&self) -> TripletKey {
        TripletKey {
            a0: self.a0.clone(),
            frame: self.action().to_string(),
            a1: self.a1.clone(),
        }
    }
}

/// Identity of an aggregated narrative fragment: `(A0, frame, A1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripletKey {
    pub a0: String,
    pub frame: String,
    pub a1: String,
}

impl TripletKey {
    pub fn new(a0: &str, frame: &str, a1: &str) -> Self {
        Self {
            a0: a0.to_string(),
            frame: frame.to_string(),
            a1: a1.to_string(),
        }
    }

    pub fn render(&self) -> String {
        format!("{} {} {}", self.a0, self.frame, self.a1)
    }
}

impl std::fmt::Display for TripletKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} + {} + {}", self.a0, self.frame, self.a1)
    }
}

/// A validated document collection, sorted by `(timestamp, id)`.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(mut docs: Vec<Document>) -> Result<Self> {
        docs.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if d.id.is_empty() {
                return Err(Error::Invalid("document with empty id".into()));
            }
            if d.text.trim().is_empty() {
                return Err(Error::Invalid(format!("document `{}` has empty text", d.id)));
            }
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate document id `{}`", d.id)));
            }
        }
        Ok(Self { docs, by_id })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    /// Copies document timestamps onto `triplets`; fails on unresolved doc ids.
    pub fn attach(&self, triplets: &mut [NarrativeTriplet]) -> Result<()> {
        let mut missing = Vec::new();
        for t in triplets.iter_mut() {
            match self.get(&t.doc_id) {
                Some(d) => t.timestamp = d.timestamp,
                None => missing.push(t.doc_id.clone()),
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            missing.sort();
            missing.dedup();
            Err(Error::Invalid(format!(
                "triplets reference unknown documents: {}",
                missing.join(", ")
            )))
        }
    }

    /// Maps each document id to the value of `key` in its metadata.
    pub fn meta_index(&self, key: &str) -> HashMap<String, String> {
        self.docs
            .iter()
            .filter_map(|d| d.meta.get(key).map(|v| (d.id.clone(), v.clone())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_validates() {
        assert!(Corpus::new(vec![Document::new("a", 0, "x"), Document::new("a", 1, "y")]).is_err());
        assert!(Corpus::new(vec![Document::new("a", 0, "   ")]).is_err());
        let c = Corpus::new(vec![Document::new("b", 5, "y"), Document::new("a", 1, "x")]).unwrap();
        assert_eq!(c.docs()[0].id, "a");
        assert_eq!(c.get("b").unwrap().timestamp, 5);
    }

    #[test]
    fn attach_timestamps() {
        let c = Corpus::new(vec![Document::new("d1", 42, "x")]).unwrap();
        let mut ts = vec![NarrativeTriplet::new("d1", "i", "love.01", "x")];
        c.attach(&mut ts).unwrap();
        assert_eq!(ts[0].timestamp, 42);
        let mut bad = vec![NarrativeTriplet::new("nope", "i", "love.01", "x")];
        assert!(c.attach(&mut bad).is_err());
    }

    #[test]
    fn day_floor_handles_negative() {
        assert_eq!(day_floor(86_399), 0);
        assert_eq!(day_floor(-1), -86_400);
    }
}
