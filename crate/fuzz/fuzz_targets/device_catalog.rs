#![no_main]

use bci_core::intent::parse_device_catalog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = parse_device_catalog(s);
    }
});
