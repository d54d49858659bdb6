#![no_main]

use bci_core::intent::{parse_instruction, render_instruction};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(instr) = parse_instruction(s) {
        // The canonical rendering is a fixed point.
        let once = render_instruction(&instr);
        let again = parse_instruction(&once).expect("canonical form parses");
        assert_eq!(again, instr);
        assert_eq!(render_instruction(&again), once);
    }
});
