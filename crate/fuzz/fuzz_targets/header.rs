#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::format::Header;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(h) = Header::parse(text) {
        assert_eq!(Header::parse(&h.render()).expect("rendered header parses"), h);
    }
});
