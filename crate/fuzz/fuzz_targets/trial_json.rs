#![no_main]

use bci_core::signal::EegTrial;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(trial) = EegTrial::from_json(s) {
        let back = EegTrial::from_json(&trial.to_json()).expect("re-encoded trial parses");
        assert_eq!(back.samples().shape(), trial.samples().shape());
    }
});
