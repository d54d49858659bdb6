#![no_main]

use bci_core::langmodel::NgramModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(model) = NgramModel::from_json(s) {
        let _ = model.suggest(&["a".to_string()], 3);
        NgramModel::from_json(&model.to_json()).expect("re-encoded model parses");
    }
});
