#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::pipeline::PipelineConfig;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PipelineConfig::from_toml(text, Path::new("/base")) {
        let _ = cfg.validate();
        let _ = cfg.to_toml();
    }
});
