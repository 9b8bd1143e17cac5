//! Documents and triplets files.
//!
//! Both are `#nfv1` record files holding one JSON object per line:
//!
//! ```text
//! #nfv1
//! {"id":"t1","timestamp":"2020-03-01T10:00:00Z","text":"...","lang":"en"}
//! ```
//!
//! Documents require `id`, `timestamp` (epoch seconds as a number or string,
//! RFC 3339, `YYYY-MM-DDTHH:MM:SS` taken as UTC, or `YYYY-MM-DD`) and `text`.
//! Any other scalar field, and the members of an optional `meta` object, become
//! document metadata.
//!
//! Triplets require `doc_id`, `a0`, `verb_sense` and `a1`; `frame` is optional.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde_json::{Map, Value};

use super::{Document, NarrativeTriplet, Timestamp};
use crate::error::{Error, Result};
use crate::format::{split_records, Header};

#[derive(Clone, Debug)]
pub struct Parsed<T> {
    pub header: Header,
    pub records: Vec<T>,
    pub warnings: Vec<String>,
}

impl<T> Parsed<T> {
    fn new(header: Header) -> Self {
        Self {
            header,
            records: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

const MAX_ABS_TIMESTAMP: f64 = 1.0e13;

/// RFC 3339 in UTC, e.g. `2020-03-12T00:00:00Z`; out-of-range values fall
/// back to the raw epoch seconds.
pub fn format_timestamp(ts: Timestamp) -> String {
    DateTime::from_timestamp(ts, 0).map_or_else(|| ts.to_string(), |d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(v) = s.parse::<f64>() {
        return finite_epoch(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

fn finite_epoch(v: f64) -> Option<Timestamp> {
    (v.is_finite() && v.abs() < MAX_ABS_TIMESTAMP).then(|| v.floor() as i64)
}

fn object(line: usize, raw: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(raw) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Error::parse(line, "record is not a JSON object")),
        Err(e) => Err(Error::parse(line, format!("invalid JSON: {e}"))),
    }
}

fn required_str(line: usize, m: &mut Map<String, Value>, key: &str) -> Result<String> {
    match m.remove(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s),
        Some(Value::String(_)) => Err(Error::parse(line, format!("field `{key}` is empty"))),
        Some(_) => Err(Error::parse(line, format!("field `{key}` must be a string"))),
        None => Err(Error::parse(line, format!("missing field `{key}`"))),
    }
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

pub fn parse_documents(text: &str) -> Result<Parsed<Document>> {
    let (header, lines) = split_records(text)?;
    let mut out = Parsed::new(header);
    for (line, raw) in lines {
        let mut m = object(line, raw)?;
        let id = required_str(line, &mut m, "id")?;
        let timestamp = match m.remove("timestamp") {
            Some(Value::Number(n)) => n.as_i64().or_else(|| n.as_f64().and_then(finite_epoch)),
            Some(Value::String(s)) => parse_timestamp(&s),
            Some(_) => None,
            None => return Err(Error::parse(line, "missing field `timestamp`")),
        }
        .ok_or_else(|| Error::parse(line, "unparseable timestamp"))?;
        let text = required_str(line, &mut m, "text")?;

        let mut meta = BTreeMap::new();
        if let Some(v) = m.remove("meta") {
            match v {
                Value::Object(inner) => {
                    for (k, v) in inner {
                        match scalar_string(&v) {
                            Some(s) => {
                                meta.insert(k, s);
                            }
                            None => out
                                .warnings
                                .push(format!("line {line}: non-scalar meta `{k}` ignored")),
                        }
                    }
                }
                Value::Null => {}
                _ => out.warnings.push(format!("line {line}: `meta` is not an object")),
            }
        }
        for (k, v) in m {
            match scalar_string(&v) {
                Some(s) => {
                    meta.insert(k, s);
                }
                None if v.is_null() => {}
                None => out
                    .warnings
                    .push(format!("line {line}: non-scalar field `{k}` ignored")),
            }
        }
        out.records.push(Document {
            id,
            timestamp,
            text,
            meta,
        });
    }
    Ok(out)
}

pub fn parse_triplets(text: &str) -> Result<Parsed<NarrativeTriplet>> {
    let (header, lines) = split_records(text)?;
    let mut out = Parsed::new(header);
    for (line, raw) in lines {
        let mut m = object(line, raw)?;
        let doc_id = required_str(line, &mut m, "doc_id")?;
        let a0 = required_str(line, &mut m, "a0")?;
        let verb_sense = required_str(line, &mut m, "verb_sense")?;
        let a1 = required_str(line, &mut m, "a1")?;
        let frame = match m.remove("frame") {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s,
            Some(_) => return Err(Error::parse(line, "field `frame` must be a string")),
        };
        let mut extra: Vec<_> = m.keys().cloned().collect();
        extra.sort();
        for k in extra {
            out.warnings.push(format!("line {line}: unknown field `{k}`"));
        }
        out.records.push(NarrativeTriplet {
            a0,
            verb_sense,
            frame,
            a1,
            doc_id,
            timestamp: 0,
        });
    }
    Ok(out)
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_documents(path: &Path) -> Result<Parsed<Document>> {
    parse_documents(&read_to_string(path)?)
}

pub fn read_triplets(path: &Path) -> Result<Parsed<NarrativeTriplet>> {
    parse_triplets(&read_to_string(path)?)
}

pub fn render_documents(header: &Header, docs: &[Document]) -> String {
    let mut s = header.render();
    s.push('\n');
    for d in docs {
        s.push_str(&serde_json::to_string(d).expect("documents serialize"));
        s.push('\n');
    }
    s
}

#[derive(serde::Serialize)]
struct TripletRecord<'a> {
    doc_id: &'a str,
    a0: &'a str,
    verb_sense: &'a str,
    a1: &'a str,
    #[serde(skip_serializing_if = "str::is_empty")]
    frame: &'a str,
}

pub fn render_triplets(header: &Header, triplets: &[NarrativeTriplet]) -> String {
    let mut s = header.render();
    s.push('\n');
    for t in triplets {
        let rec = TripletRecord {
            doc_id: &t.doc_id,
            a0: &t.a0,
            verb_sense: &t.verb_sense,
            a1: &t.a1,
            frame: &t.frame,
        };
        s.push_str(&serde_json::to_string(&rec).expect("triplets serialize"));
        s.push('\n');
    }
    s
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    crate::write_file(path, render_documents(&Header::default(), docs).as_bytes())
}

pub fn write_triplets(path: &Path, triplets: &[NarrativeTriplet]) -> Result<()> {
    crate::write_file(path, render_triplets(&Header::default(), triplets).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("0"), Some(0));
        assert_eq!(parse_timestamp("1583020800"), Some(1_583_020_800));
        assert_eq!(parse_timestamp("2020-03-01"), Some(1_583_020_800));
        assert_eq!(parse_timestamp("2020-03-01T00:00:10Z"), Some(1_583_020_810));
        assert_eq!(parse_timestamp("2020-03-01T01:00:00+01:00"), Some(1_583_020_800));
        assert_eq!(parse_timestamp("2020-03-01T00:00:00"), Some(1_583_020_800));
        assert_eq!(parse_timestamp("12.9"), Some(12));
        assert_eq!(parse_timestamp("NaN"), None);
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn documents_with_meta() {
        let text = "#nfv1\n{\"id\":\"1\",\"timestamp\":10,\"text\":\"hi\",\"lang\":\"en\",\"meta\":{\"sub\":\"macron\"}}\n";
        let p = parse_documents(text).unwrap();
        assert!(p.warnings.is_empty());
        let d = &p.records[0];
        assert_eq!(d.meta["lang"], "en");
        assert_eq!(d.meta["sub"], "macron");
        let again = parse_documents(&render_documents(&p.header, &p.records)).unwrap();
        assert_eq!(again.records, p.records);
    }

    #[test]
    fn document_errors_carry_line() {
        let err = parse_documents("#nfv1\n{\"id\":\"1\",\"text\":\"x\"}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_documents("{\"id\":\"1\"}").is_err());
        assert!(parse_documents("#nfv1\n[1,2]").is_err());
        assert!(parse_documents("#nfv1\n{\"id\":\"1\",\"timestamp\":1e300,\"text\":\"x\"}").is_err());
    }

    #[test]
    fn triplets_roundtrip_and_warn() {
        let text = "#nfv1\n{\"doc_id\":\"d\",\"a0\":\"You\",\"verb_sense\":\"back.01\",\"a1\":\"Macron\",\"conf\":0.9}\n";
        let p = parse_triplets(text).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert_eq!(p.records[0].frame, "");
        let again = parse_triplets(&render_triplets(&p.header, &p.records)).unwrap();
        assert_eq!(again.records, p.records);
        assert!(again.warnings.is_empty());
    }

    #[test]
    fn triplet_requires_roles() {
        assert!(parse_triplets("#nfv1\n{\"doc_id\":\"d\",\"a0\":\"\",\"verb_sense\":\"v.01\",\"a1\":\"x\"}").is_err());
    }
}
