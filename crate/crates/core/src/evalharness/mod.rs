//! Metrics and experiment drivers for the synthetic evaluation.

mod experiments;
mod metrics;

pub use experiments::*;
pub use metrics::*;
