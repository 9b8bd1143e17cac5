#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::network::{export_json, import_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = import_json(text) {
        assert_eq!(import_json(&export_json(&net)).expect("exported graph imports"), net);
    }
});
