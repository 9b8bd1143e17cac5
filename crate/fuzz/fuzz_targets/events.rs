#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::synthgen::{parse_events, render_events};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(events) = parse_events(text) {
        assert_eq!(parse_events(&render_events(&events)).expect("rendered events parse"), events);
    }
});
