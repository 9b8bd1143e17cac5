//! Shared framing for the line-oriented `#nfv1` record files.
//!
//! Every record file starts with a header line `#nfv1`, optionally followed by
//! whitespace separated `key=value` flags (for example `#nfv1 senses=lemma`).
//! Each following non-blank line is one record; lines starting with `#` after
//! the header are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const MAGIC: &str = "#nfv1";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Header {
    pub flags: BTreeMap<String, String>,
}

impl Header {
    pub fn with_flag(mut self, key: &str, value: &str) -> Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn flag(&self, key: &str) -> Option<&str> {
        self.flags.get(key).map(String::as_str)
    }

    pub fn parse(line: &str) -> Result<Header> {
        let line = line.strip_prefix('\u{feff}').unwrap_or(line).trim_end();
        let mut parts = line.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(Error::BadHeader);
        }
        let mut flags = BTreeMap::new();
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("malformed header flag `{part}`")))?;
            if k.is_empty() {
                return Err(Error::parse(1, format!("malformed header flag `{part}`")));
            }
            flags.insert(k.to_string(), v.to_string());
        }
        Ok(Header { flags })
    }

    pub fn render(&self) -> String {
        let mut s = MAGIC.to_string();
        for (k, v) in &self.flags {
            let _ = write!(s, " {k}={v}");
        }
        s
    }
}

/// Splits `text` into its header and the (1-based line number, line) pairs of
/// its records.
pub(crate) fn split_records(text: &str) -> Result<(Header, Vec<(usize, &str)>)> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break Header::parse(l)?,
            None => return Err(Error::BadHeader),
        }
    };
    let records = lines
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .collect();
    Ok((header, records))
}
