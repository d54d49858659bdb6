#![no_main]

use bci_session::replay_reader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = replay_reader(data);
});
