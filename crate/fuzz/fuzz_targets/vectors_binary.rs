#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::fragments::{parse_vectors, parse_vectors_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = parse_vectors_binary(data) {
        assert!(table.vectors.iter().all(|v| v.len() == table.dim));
        let again = parse_vectors_binary(&table.render_binary()).expect("rendered table parses");
        assert_eq!(again.texts, table.texts);
    }
    let _ = parse_vectors(data);
});
