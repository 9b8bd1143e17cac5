use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{tokenize, Document, FeatureVector};
use crate::error::{Error, Result};

pub const DEFAULT_VOCAB_SIZE: usize = 5000;

/// The most frequent tokens of a corpus, indexed by frequency rank.
///
/// Index `i` is the token with the `i`-th highest total term frequency (ties
/// broken lexicographically), so truncating to the first `k` entries gives the
/// vocabulary that would have been built with `size = k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    term_freq: Vec<u64>,
    doc_freq: Vec<u64>,
    n_docs: usize,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn doc_freq(&self, index: u32) -> u64 {
        self.doc_freq[index as usize]
    }

    pub fn term_freq(&self, index: u32) -> u64 {
        self.term_freq[index as usize]
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, index: u32) -> f64 {
        let n = self.n_docs as f64;
        let df = self.doc_freq[index as usize] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    pub fn truncate(&mut self, size: usize) {
        if size >= self.tokens.len() {
            return;
        }
        for t in self.tokens.drain(size..) {
            self.index.remove(&t);
        }
        self.term_freq.truncate(size);
        self.doc_freq.truncate(size);
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }
}

/// Keeps the `size` tokens with the highest total term frequency.
pub fn build_vocabulary(docs: &[Document], size: usize) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if size == 0 {
        return Err(Error::Invalid("vocabulary size must be at least 1".into()));
    }
    let mut counts: HashMap<String, (u64, u64)> = HashMap::new();
    for doc in docs {
        let mut seen: Vec<String> = tokenize(&doc.text);
        for tok in &seen {
            counts.entry(tok.clone()).or_default().0 += 1;
        }
        seen.sort_unstable();
        seen.dedup();
        for tok in seen {
            counts.get_mut(&tok).expect("counted above").1 += 1;
        }
    }
    let mut ranked: Vec<(String, (u64, u64))> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1 .0.cmp(&a.1 .0).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(size);

    let mut vocab = Vocabulary {
        tokens: Vec::with_capacity(ranked.len()),
        term_freq: Vec::with_capacity(ranked.len()),
        doc_freq: Vec::with_capacity(ranked.len()),
        n_docs: docs.len(),
        index: HashMap::new(),
    };
    for (tok, (tf, df)) in ranked {
        vocab.tokens.push(tok);
        vocab.term_freq.push(tf);
        vocab.doc_freq.push(df);
    }
    vocab.reindex();
    Ok(vocab)
}

/// TF-IDF weights of `doc` over `vocab`, L2-normalized. Out-of-vocabulary
/// tokens are ignored; a document with none in vocabulary maps to zero.
pub fn tfidf_transform(doc: &Document, vocab: &Vocabulary) -> FeatureVector {
    tfidf_text(&doc.text, vocab)
}

pub fn tfidf_text(text: &str, vocab: &Vocabulary) -> FeatureVector {
    let mut tf: HashMap<u32, f64> = HashMap::new();
    for tok in tokenize(text) {
        if let Some(i) = vocab.index_of(&tok) {
            *tf.entry(i).or_default() += 1.0;
        }
    }
    let pairs = tf.into_iter().map(|(i, c)| (i, c * vocab.idf(i))).collect();
    let mut v = FeatureVector::from_pairs(vocab.len(), pairs);
    v.normalize();
    v
}
