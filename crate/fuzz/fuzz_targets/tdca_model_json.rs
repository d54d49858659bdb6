#![no_main]

use bci_core::tdca::TdcaModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(model) = TdcaModel::from_json(s) {
        TdcaModel::from_json(&model.to_json()).expect("re-encoded model parses");
    }
});
