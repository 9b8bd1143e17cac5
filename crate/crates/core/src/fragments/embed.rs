//! Text embeddings: a built-in hashed character n-gram vectorizer and
//! externally computed vector files.
//!
//! Vector files come in two profiles. The text profile is an `#nfv1` record
//! file whose header carries `kind=vectors dim=<D> count=<N>` and whose records
//! are JSON objects `{"text": "...", "vector": [f, ...]}`. The binary profile
//! is little-endian:
//!
//! ```text
//! b"NFV1BVEC"  u32 dim  u64 count
//! count x ( u32 byte_len  utf8 text  dim x f32 )
//! ```
//!
//! Vectors are L2-normalised on load; a stored norm away from 1 is reported
//! as a warning.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::format::{split_records, Header};

pub const BINARY_MAGIC: &[u8; 8] = b"NFV1BVEC";
pub const DEFAULT_DIM: usize = 384;

/// Character n-gram feature hashing with signed buckets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedNgrams {
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
}

impl Default for HashedNgrams {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            min_n: 3,
            max_n: 5,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HashedNgrams {
    pub fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let norm_text: String = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let chars: Vec<char> = format!(" {norm_text} ").chars().collect();
        let mut buf = String::new();
        for n in self.min_n..=self.max_n {
            for w in chars.windows(n) {
                buf.clear();
                buf.extend(w);
                let h = fnv1a(buf.as_bytes());
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[(h % self.dim as u64) as usize] += sign;
            }
        }
        normalize(&mut v);
        v
    }
}

/// Scales `v` to unit length; zero vectors stay zero. Returns the old norm.
pub fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Vectors keyed by text, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VectorTable {
    pub dim: usize,
    pub texts: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
    index: HashMap<String, usize>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&[f64]> {
        self.index.get(text).map(|&i| self.vectors[i].as_slice())
    }

    /// Adds a record, normalising the vector. Repeated texts must carry the
    /// same vector.
    pub fn insert(&mut self, text: &str, mut vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("non-finite vector for `{text}`")));
        }
        let norm = normalize(&mut vector);
        if norm == 0.0 {
            return Err(Error::Invalid(format!("zero vector for `{text}`")));
        }
        if (norm - 1.0).abs() > 1e-3 {
            self.warnings.push(format!("vector for `{text}` had norm {norm:.6}; normalised"));
        }
        match self.index.get(text) {
            Some(&i) if self.vectors[i] == vector => Ok(()),
            Some(_) => Err(Error::Invalid(format!("conflicting vectors for `{text}`"))),
            None => {
                self.index.insert(text.to_string(), self.texts.len());
                self.texts.push(text.to_string());
                self.vectors.push(vector);
                Ok(())
            }
        }
    }

    pub fn render_text(&self) -> String {
        let header = Header::default()
            .with_flag("kind", "vectors")
            .with_flag("dim", &self.dim.to_string())
            .with_flag("count", &self.len().to_string());
        let mut s = header.render();
        s.push('\n');
        for (t, v) in self.texts.iter().zip(&self.vectors) {
            let rec = serde_json::json!({ "text": t, "vector": v });
            s.push_str(&rec.to_string());
            s.push('\n');
        }
        s
    }

    pub fn render_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.len() * (8 + 4 * self.dim));
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (t, v) in self.texts.iter().zip(&self.vectors) {
            out.extend_from_slice(&(t.len() as u32).to_le_bytes());
            out.extend_from_slice(t.as_bytes());
            for &x in v {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }
}

fn header_usize(h: &Header, key: &str) -> Result<usize> {
    h.flag(key)
        .ok_or_else(|| Error::parse(1, format!("vector file header lacks `{key}`")))?
        .parse()
        .map_err(|_| Error::parse(1, format!("bad `{key}` in vector file header")))
}

/// Parses the text profile.
pub fn parse_vectors_text(text: &str) -> Result<VectorTable> {
    let (header, lines) = split_records(text)?;
    if let Some(kind) = header.flag("kind") {
        if kind != "vectors" {
            return Err(Error::parse(1, format!("expected kind=vectors, found kind={kind}")));
        }
    }
    let dim = header_usize(&header, "dim")?;
    let count = header_usize(&header, "count")?;
    if dim == 0 {
        return Err(Error::parse(1, "dim must be positive"));
    }
    let mut table = VectorTable::new(dim);
    for (n, line) in &lines {
        let v: Value = serde_json::from_str(line).map_err(|e| Error::parse(*n, e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| Error::parse(*n, "record is not an object"))?;
        let text = obj
            .get("text")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::parse(*n, "missing string field `text`"))?;
        let arr = obj
            .get("vector")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse(*n, "missing array field `vector`"))?;
        let vector = arr
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::parse(*n, "vector holds a non-number")))
            .collect::<Result<Vec<f64>>>()?;
        for key in obj.keys().filter(|k| *k != "text" && *k != "vector") {
            table.warnings.push(format!("line {n}: unknown field `{key}`"));
        }
        table.insert(text, vector).map_err(|e| Error::parse(*n, e.to_string()))?;
    }
    if lines.len() != count {
        return Err(Error::parse(1, format!("header announces {count} records, file holds {}", lines.len())));
    }
    Ok(table)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Invalid(format!("truncated vector file at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses the binary profile.
pub fn parse_vectors_binary(bytes: &[u8]) -> Result<VectorTable> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8).ok() != Some(BINARY_MAGIC.as_slice()) {
        return Err(Error::BadHeader);
    }
    let dim = r.u32()? as usize;
    let count = r.u64()?;
    if dim == 0 {
        return Err(Error::Invalid("dim must be positive".into()));
    }
    // every record needs at least 4 + 4 * dim bytes
    let min_record = 4 + 4 * dim as u64;
    if count.saturating_mul(min_record) > (bytes.len() - r.at) as u64 {
        return Err(Error::Invalid(format!("{count} records cannot fit in {} bytes", bytes.len())));
    }
    let mut table = VectorTable::new(dim);
    for i in 0..count {
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Invalid(format!("record {i}: text is not UTF-8")))?;
        let raw = r.take(4 * dim)?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        table
            .insert(text, vector)
            .map_err(|e| Error::Invalid(format!("record {i}: {e}")))?;
    }
    if r.at != bytes.len() {
        return Err(Error::Invalid(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    Ok(table)
}

/// Parses either profile, told apart by the binary magic.
pub fn parse_vectors(bytes: &[u8]) -> Result<VectorTable> {
    if bytes.starts_with(BINARY_MAGIC) {
        parse_vectors_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Invalid("vector file is neither binary nor UTF-8".into()))?;
        parse_vectors_text(text)
    }
}

pub fn read_vectors(path: &Path) -> Result<VectorTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_vectors(&bytes)
}

/// Where embeddings come from.
#[derive(Clone, Debug)]
pub enum EmbeddingSource {
    Hashed(HashedNgrams),
    External(VectorTable),
}

impl Default for EmbeddingSource {
    fn default() -> Self {
        EmbeddingSource::Hashed(HashedNgrams::default())
    }
}

impl EmbeddingSource {
    /// An external table checked against the configured dimension.
    pub fn external(table: VectorTable, expected_dim: Option<usize>) -> Result<Self> {
        if let Some(d) = expected_dim {
            if d != table.dim {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: table.dim,
                });
            }
        }
        Ok(EmbeddingSource::External(table))
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingSource::Hashed(h) => h.dim,
            EmbeddingSource::External(t) => t.dim,
        }
    }

    /// Unit vectors for `texts`; an external table must hold every text.
    pub fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        match self {
            EmbeddingSource::Hashed(h) => {
                use rayon::prelude::*;
                Ok(texts.par_iter().map(|t| h.embed(t)).collect())
            }
            EmbeddingSource::External(table) => {
                let mut missing: Vec<String> = texts
                    .iter()
                    .filter(|t| table.get(t).is_none())
                    .map(|t| t.to_string())
                    .collect();
                if !missing.is_empty() {
                    missing.sort();
                    missing.dedup();
                    return Err(Error::MissingEmbeddings(missing));
                }
                Ok(texts.iter().map(|t| table.get(t).expect("checked").to_vec()).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashed_is_unit_and_deterministic() {
        let h = HashedNgrams::default();
        let a = h.embed("you support macron");
        assert_eq!(a.len(), 384);
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a, h.embed("you  support Macron"));
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_embeds_to_a_finite_vector() {
        let v = HashedNgrams::default().embed("");
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn table_rejects_conflicts_and_bad_dims() {
        let mut t = VectorTable::new(2);
        t.insert("a", vec![3.0, 4.0]).unwrap();
        assert_eq!(t.get("a").unwrap(), &[0.6, 0.8]);
        assert_eq!(t.warnings.len(), 1);
        t.insert("a", vec![0.6, 0.8]).unwrap();
        assert!(t.insert("a", vec![1.0, 0.0]).is_err());
        assert!(t.insert("b", vec![1.0]).is_err());
        assert!(t.insert("c", vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let mut t = VectorTable::new(3);
        t.insert("x", vec![1.0, 0.0, 0.0]).unwrap();
        let bytes = t.render_binary();
        for cut in 0..bytes.len() {
            assert!(parse_vectors_binary(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut huge = bytes[..12].to_vec();
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(parse_vectors_binary(&huge).is_err());
    }
}
