#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::fragments::FrameMap;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = FrameMap::from_tsv(text) {
        let back = FrameMap::from_tsv(&map.render()).expect("rendered map parses");
        assert_eq!(back.len(), map.len());
    }
});
