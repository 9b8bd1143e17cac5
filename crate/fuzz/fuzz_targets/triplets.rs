#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::corpus::{parse_triplets, render_triplets};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = parse_triplets(text) {
        let again = render_triplets(&parsed.header, &parsed.records);
        let back = parse_triplets(&again).expect("rendered triplets parse");
        assert_eq!(back.records.len(), parsed.records.len());
    }
});
