//! Verb lexicon used by the pattern extractor and the template paraphraser.
//!
//! Tab-separated, one verb per line: `group  sense  present  past  participle`.
//! Verbs sharing a group are interchangeable synonyms for paraphrasing. The
//! lemma is the sense with its `.NN` suffix removed. Lines starting with `#`
//! are comments.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/verbs.tsv");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerbEntry {
    pub group: String,
    pub sense: String,
    pub lemma: String,
    pub present: String,
    pub past: String,
    pub participle: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Form {
    /// Bare form, used as the plural present.
    Lemma,
    Present,
    Past,
    Participle,
}

#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    verbs: Vec<VerbEntry>,
    forms: HashMap<String, Vec<(usize, Form)>>,
    groups: HashMap<String, Vec<usize>>,
}

impl Lexicon {
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 5 || cols.iter().any(|c| c.is_empty()) {
                return Err(Error::parse(n + 1, "expected 5 non-empty tab-separated columns"));
            }
            let lemma = cols[1].split('.').next().unwrap_or(cols[1]);
            if lemma.is_empty() {
                return Err(Error::parse(n + 1, format!("bad verb sense `{}`", cols[1])));
            }
            if lex.verbs.iter().any(|v| v.sense == cols[1]) {
                return Err(Error::parse(n + 1, format!("duplicate verb sense `{}`", cols[1])));
            }
            lex.verbs.push(VerbEntry {
                group: cols[0].to_string(),
                sense: cols[1].to_string(),
                lemma: lemma.to_lowercase(),
                present: cols[2].to_lowercase(),
                past: cols[3].to_lowercase(),
                participle: cols[4].to_lowercase(),
            });
        }
        for (i, v) in lex.verbs.iter().enumerate() {
            for (word, form) in [
                (&v.lemma, Form::Lemma),
                (&v.present, Form::Present),
                (&v.past, Form::Past),
                (&v.participle, Form::Participle),
            ] {
                lex.forms.entry(word.clone()).or_default().push((i, form));
            }
            lex.groups.entry(v.group.clone()).or_default().push(i);
        }
        Ok(lex)
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| Lexicon::from_tsv(BUNDLED).expect("bundled verb lexicon is valid"))
    }

    pub fn len(&self) -> usize {
        self.verbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verbs.is_empty()
    }

    pub fn verb(&self, i: usize) -> &VerbEntry {
        &self.verbs[i]
    }

    pub fn verbs(&self) -> &[VerbEntry] {
        &self.verbs
    }

    /// Lexicon entries whose inflection matches the lowercase `word`.
    pub fn lookup(&self, word: &str) -> &[(usize, Form)] {
        self.forms.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn by_sense(&self, sense: &str) -> Option<usize> {
        self.verbs.iter().position(|v| v.sense == sense)
    }

    /// Indices of the verbs sharing `i`'s group, in file order.
    pub fn synonyms(&self, i: usize) -> &[usize] {
        &self.groups[&self.verbs[i].group]
    }
}
