#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::corpus::{parse_documents, render_documents};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = parse_documents(text) {
        let again = render_documents(&parsed.header, &parsed.records);
        let back = parse_documents(&again).expect("rendered documents parse");
        assert_eq!(back.records, parsed.records);
    }
});
