//! Pattern-based `(A0, verb, A1)` extraction for simple declarative sentences.
//!
//! Covers the shapes produced by the event files and the paraphraser:
//!
//! * `[Lead clause,] A0 [adverb] VERB A1 [modifier]`
//! * `A1 is|are|was|were [adverb] PARTICIPLE by A0 [modifier]`
//! * `A0 VERB A1 and VERB A1'` (coordination, one triplet per verb)
//!
//! The first verb form found after a non-empty agent is the predicate. A bare
//! verb form only counts when it does not follow a determiner, so "the record"
//! stays a noun. The patient ends at a comma, a boundary preposition or a
//! coordinated verb. Arguments are lowercased.

use super::lexicon::{Form, Lexicon};
use crate::corpus::NarrativeTriplet;

const BOUNDARY: &[&str] = &[
    "about", "after", "against", "amid", "as", "at", "before", "by", "despite", "during", "following", "for", "from", "in",
    "into", "on", "over", "since", "to", "under", "with", "within", "without", "across",
];
const DETERMINERS: &[&str] = &["a", "an", "the", "this", "that", "its", "his", "her", "their", "our", "my", "your"];
const AUX: &[&str] = &["is", "are", "was", "were"];
pub(crate) const ADVERBS: &[&str] = &["officially", "formally", "reportedly", "quickly"];

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub text: String,
    pub lower: String,
    /// A comma (or `;`/`:`) followed the token.
    pub pause: bool,
}

pub(crate) fn tokens(sentence: &str) -> Vec<Token> {
    let s = sentence.trim().trim_end_matches(['.', '!', '?']);
    s.split_whitespace()
        .filter_map(|w| {
            let pause = w.ends_with([',', ';', ':']);
            let text = w.trim_end_matches([',', ';', ':']).trim_matches(['"', '(', ')']);
            (!text.is_empty()).then(|| Token {
                text: text.to_string(),
                lower: text.to_lowercase(),
                pause,
            })
        })
        .collect()
}

/// One predicate with its arguments, as token ranges into the sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Clause {
    pub lead: Option<(usize, usize)>,
    pub a0: (usize, usize),
    pub verb: usize,
    pub form: Form,
    pub passive: bool,
    pub a1: (usize, usize),
    /// Trailing modifier after the patient, empty when coordination follows.
    pub tail: (usize, usize),
}

fn is_adverb(w: &str) -> bool {
    ADVERBS.contains(&w)
}

fn finite_form(lex: &Lexicon, toks: &[Token], k: usize, start: usize) -> Option<(usize, Form)> {
    let hits = lex.lookup(&toks[k].lower);
    let after_det = k > start && DETERMINERS.contains(&toks[k - 1].lower.as_str());
    [Form::Present, Form::Past, Form::Lemma]
        .into_iter()
        .find_map(|want| {
            if want == Form::Lemma && (k == start || after_det) {
                return None;
            }
            hits.iter().find(|&&(_, f)| f == want).copied()
        })
}

fn participle(lex: &Lexicon, word: &str) -> Option<usize> {
    lex.lookup(word).iter().find(|&&(_, f)| f == Form::Participle).map(|&(i, _)| i)
}

/// End of an argument starting at `from`; stops before a boundary word or a
/// coordinated verb and after a token followed by a comma.
fn argument_end(lex: &Lexicon, toks: &[Token], from: usize) -> (usize, bool) {
    let mut k = from;
    while k < toks.len() {
        let w = toks[k].lower.as_str();
        if k > from && BOUNDARY.contains(&w) {
            return (k, false);
        }
        if k > from && w == "and" && k + 1 < toks.len() && finite_form(lex, toks, k + 1, k + 1).is_some() {
            return (k, true);
        }
        k += 1;
        if toks[k - 1].pause {
            break;
        }
    }
    (k, false)
}

pub(crate) fn parse(lex: &Lexicon, toks: &[Token]) -> Vec<Clause> {
    let mut start = 0;
    let mut lead = None;
    if let Some(first) = toks.first() {
        if BOUNDARY.contains(&first.lower.as_str()) {
            if let Some(c) = toks.iter().position(|t| t.pause) {
                lead = Some((0, c + 1));
                start = c + 1;
            }
        }
    }

    for k in start..toks.len() {
        if k > start && AUX.contains(&toks[k].lower.as_str()) {
            let mut p = k + 1;
            if p < toks.len() && is_adverb(&toks[p].lower) {
                p += 1;
            }
            if p + 1 < toks.len() && toks[p + 1].lower == "by" {
                if let Some(v) = participle(lex, &toks[p].lower) {
                    let (end, _) = argument_end(lex, toks, p + 2);
                    if end == p + 2 {
                        return Vec::new();
                    }
                    return vec![Clause {
                        lead,
                        a0: (p + 2, end),
                        verb: v,
                        form: Form::Participle,
                        passive: true,
                        a1: (start, k),
                        tail: (end, toks.len()),
                    }];
                }
            }
        }
        if k > start {
            if let Some((v, form)) = finite_form(lex, toks, k, start) {
                return active(lex, toks, lead, (start, k), k, v, form);
            }
        }
    }
    Vec::new()
}

fn active(
    lex: &Lexicon,
    toks: &[Token],
    lead: Option<(usize, usize)>,
    a0: (usize, usize),
    mut at: usize,
    mut verb: usize,
    mut form: Form,
) -> Vec<Clause> {
    let mut out = Vec::new();
    loop {
        let (end, coordinated) = argument_end(lex, toks, at + 1);
        if end > at + 1 {
            out.push(Clause {
                lead,
                a0,
                verb,
                form,
                passive: false,
                a1: (at + 1, end),
                tail: if coordinated { (end, end) } else { (end, toks.len()) },
            });
        }
        if !coordinated {
            return out;
        }
        at = end + 1;
        let Some((v, f)) = finite_form(lex, toks, at, at) else {
            return out;
        };
        verb = v;
        form = f;
    }
}

fn span_text(toks: &[Token], (s, e): (usize, usize)) -> String {
    toks[s..e]
        .iter()
        .filter(|t| !is_adverb(&t.lower))
        .map(|t| t.lower.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Extracts triplets from one sentence; `doc_id` is left empty.
pub fn extract_triplets(lex: &Lexicon, sentence: &str) -> Vec<NarrativeTriplet> {
    let toks = tokens(sentence);
    parse(lex, &toks)
        .into_iter()
        .filter_map(|c| {
            let a0 = span_text(&toks, c.a0);
            let a1 = span_text(&toks, c.a1);
            (!a0.is_empty() && !a1.is_empty()).then(|| NarrativeTriplet::new("", &a0, &lex.verb(c.verb).sense, &a1))
        })
        .collect()
}

/// Splits text into sentences on `.`, `!` and `?` followed by whitespace.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?') && bytes.get(i + 1).is_none_or(|c| c.is_ascii_whitespace()) {
            let s = text[start..=i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}
