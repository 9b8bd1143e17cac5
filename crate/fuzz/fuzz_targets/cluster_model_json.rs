#![no_main]

use libfuzzer_sys::fuzz_target;
use narrative_core::fragments::ClusterModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ClusterModel::from_json(text) {
        let again = model.to_json();
        assert_eq!(ClusterModel::from_json(&again).expect("rendered model parses").to_json(), again);
    }
});
