#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::changepoint::SegmentTree;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(tree) = SegmentTree::from_json(text) {
        let again = tree.to_json();
        assert_eq!(SegmentTree::from_json(&again).expect("rendered tree parses").to_json(), again);
    }
});
