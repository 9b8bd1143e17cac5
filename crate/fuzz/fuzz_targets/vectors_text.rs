#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::fragments::parse_vectors_text;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = parse_vectors_text(text) {
        assert_eq!(table.texts.len(), table.vectors.len());
        assert!(table.vectors.iter().all(|v| v.len() == table.dim));
    }
});
