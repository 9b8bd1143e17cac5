//! Deterministic template paraphrases of single-clause event sentences.
//!
//! A variant picks a synonym from the verb's group, present or past tense,
//! active or passive voice, the position of the trailing modifier (end of the
//! sentence or fronted before a comma) and an optional adverb.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::extract::{parse, tokens, Clause, Token, ADVERBS};
use super::lexicon::{Form, Lexicon};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Variant {
    verb: usize,
    past: bool,
    passive: bool,
    front: bool,
    adverb: Option<&'static str>,
}

const LOWER_WHEN_MOVED: &[&str] = &["The", "A", "An"];

fn words(toks: &[Token], (s, e): (usize, usize)) -> Vec<String> {
    toks[s..e].iter().map(|t| t.text.clone()).collect()
}

fn plural(phrase: &[String]) -> bool {
    if phrase.iter().any(|w| w.eq_ignore_ascii_case("and")) {
        return true;
    }
    let last = phrase.last().map(|w| w.to_lowercase()).unwrap_or_default();
    last.len() > 2 && last.ends_with('s') && !last.ends_with("ss") && !last.ends_with("us") && !last.ends_with("is")
}

fn render(lex: &Lexicon, toks: &[Token], clause: &Clause, v: Variant) -> String {
    let a0 = words(toks, clause.a0);
    let a1 = words(toks, clause.a1);
    let tail = words(toks, clause.tail);
    let entry = lex.verb(v.verb);

    let mut core: Vec<String> = Vec::new();
    if v.passive {
        core.extend(a1.iter().cloned());
        let aux = match (plural(&a1), v.past) {
            (false, false) => "is",
            (true, false) => "are",
            (false, true) => "was",
            (true, true) => "were",
        };
        core.push(aux.to_string());
        core.extend(v.adverb.map(String::from));
        core.push(entry.participle.clone());
        core.push("by".to_string());
        core.extend(a0.iter().cloned());
    } else {
        core.extend(a0.iter().cloned());
        core.extend(v.adverb.map(String::from));
        let verb = if v.past {
            &entry.past
        } else if clause.form == Form::Lemma {
            &entry.lemma
        } else {
            &entry.present
        };
        core.push(verb.clone());
        core.extend(a1.iter().cloned());
    }

    let mut out: Vec<String> = Vec::new();
    if v.front && !tail.is_empty() {
        out.extend(tail.iter().cloned());
        if let Some(last) = out.last_mut() {
            last.push(',');
        }
        out.extend(core);
    } else {
        out.extend(core);
        out.extend(tail);
    }
    for w in out.iter_mut().skip(1) {
        if LOWER_WHEN_MOVED.contains(&w.as_str()) {
            *w = w.to_lowercase();
        }
    }
    if let Some(first) = out.first_mut() {
        let mut cs = first.chars();
        if let Some(c) = cs.next() {
            *first = c.to_uppercase().chain(cs).collect();
        }
    }
    let mut s = out.join(" ");
    s.push('.');
    s
}

/// Up to `k` distinct paraphrases of `sentence`, none equal to the original.
/// Returns an empty list when the sentence does not parse into exactly one
/// active clause.
pub fn paraphrases(lex: &Lexicon, sentence: &str, k: usize, seed: u64) -> Vec<String> {
    if k == 0 {
        return Vec::new();
    }
    let toks = tokens(sentence);
    let clauses = parse(lex, &toks);
    let [clause] = clauses.as_slice() else {
        return Vec::new();
    };
    if clause.passive || clause.lead.is_some() {
        return Vec::new();
    }
    let has_tail = clause.tail.1 > clause.tail.0;
    let mut variants = Vec::new();
    for &verb in lex.synonyms(clause.verb) {
        for past in [false, true] {
            for passive in [false, true] {
                for front in [false, true] {
                    if front && !has_tail {
                        continue;
                    }
                    for adverb in std::iter::once(None).chain(ADVERBS.iter().copied().map(Some)) {
                        variants.push(Variant {
                            verb,
                            past,
                            passive,
                            front,
                            adverb,
                        });
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    variants.shuffle(&mut rng);
    let original = sentence.trim();
    let mut out: Vec<String> = Vec::with_capacity(k);
    for v in variants {
        let s = render(lex, &toks, clause, v);
        if s != original && !out.contains(&s) {
            out.push(s);
            if out.len() == k {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::extract::extract_triplets;

    #[test]
    fn variants_keep_arguments() {
        let lex = Lexicon::bundled();
        let s = "Japanese officials quarantine the Diamond Princess cruise ship in Yokohama.";
        let ps = paraphrases(lex, s, 12, 7);
        assert_eq!(ps.len(), 12);
        let orig = &extract_triplets(lex, s)[0];
        for p in &ps {
            let t = extract_triplets(lex, p);
            assert_eq!(t.len(), 1, "{p}");
            assert_eq!((&t[0].a0, &t[0].a1), (&orig.a0, &orig.a1), "{p}");
            assert_eq!(lex.verb(lex.by_sense(&t[0].verb_sense).unwrap()).group, "quarantine");
        }
    }

    #[test]
    fn passive_agreement() {
        let lex = Lexicon::bundled();
        let toks = tokens("Georgia reopens gyms and hair salons.");
        let c = &parse(lex, &toks)[0];
        let v = Variant {
            verb: c.verb,
            past: false,
            passive: true,
            front: false,
            adverb: None,
        };
        assert_eq!(render(lex, &toks, c, v), "Gyms and hair salons are reopened by Georgia.");
        let toks = tokens("The CDC warns Americans about community spread.");
        let c = &parse(lex, &toks)[0];
        let v = Variant {
            verb: c.verb,
            past: true,
            passive: false,
            front: true,
            adverb: Some("reportedly"),
        };
        assert_eq!(render(lex, &toks, c, v), "About community spread, the CDC reportedly warned Americans.");
    }

    #[test]
    fn deterministic_and_zero() {
        let lex = Lexicon::bundled();
        let s = "The WHO declares a global health emergency over the outbreak.";
        assert_eq!(paraphrases(lex, s, 5, 1), paraphrases(lex, s, 5, 1));
        assert!(paraphrases(lex, s, 0, 1).is_empty());
    }
}
