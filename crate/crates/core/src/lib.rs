//! Discovery of collective narrative shifts in timestamped text.
//!
//! The pipeline detects change points in a document stream by how well a
//! classifier separates "before" from "after" ([`changepoint`]), aggregates
//! `(agent, action, patient)` narrative fragments into clusters
//! ([`fragments`]), ranks fragments per time frame with informative-prior
//! log-odds ([`significance`]) and extracts backbone narrative networks
//! ([`network`]). [`synthgen`] and [`evalharness`] provide planted-narrative
//! corpora and the robustness experiments run on them; [`pipeline`] chains
//! the stages over files for batch runs.

pub mod changepoint;
pub mod corpus;
pub mod error;
pub mod evalharness;
pub mod format;
pub mod fragments;
pub mod network;
pub mod pipeline;
pub mod significance;
pub mod synthgen;

pub use error::{Error, Result};

use std::path::Path;

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
