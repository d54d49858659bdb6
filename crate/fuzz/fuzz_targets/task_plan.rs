#![no_main]

use bci_core::intent::{compile_plan, parse_task_plan, Domain};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&tag, rest)) = data.split_first() else { return };
    let Ok(s) = std::str::from_utf8(rest) else { return };
    let domain = match tag % 3 {
        0 => Domain::Arm,
        1 => Domain::Uav,
        _ => Domain::Home,
    };
    if let Ok(plan) = parse_task_plan(s, domain) {
        let _ = compile_plan(&plan);
    }
});
