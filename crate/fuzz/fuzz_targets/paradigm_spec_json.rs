#![no_main]

use bci_core::paradigm::{validate_paradigm, ParadigmSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = serde_json::from_str::<ParadigmSpec>(s) {
        let _ = validate_paradigm(&spec);
        let _ = spec.to_json();
    }
});
