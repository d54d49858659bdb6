#![no_main]

use bci_core::devices::{discover, Fleet};
use bci_core::intent::Domain;
use bci_gateway::{validate_response, LlmRequest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&tag, rest)) = data.split_first() else { return };
    let Ok(s) = std::str::from_utf8(rest) else { return };
    let req = match tag % 3 {
        0 => LlmRequest::paradigm("turn on the light", "en", discover(&Fleet::demo()), 40),
        1 => LlmRequest::task("grab the cube", "en", Domain::Arm, 40),
        _ => LlmRequest::task("fly forward", "en", Domain::Uav, 40),
    };
    if let Ok(payload) = validate_response(s, &req) {
        // An accepted payload re-validates after a round trip.
        let env = payload.to_envelope().to_string();
        validate_response(&env, &req).expect("re-encoded envelope validates");
    }
});
