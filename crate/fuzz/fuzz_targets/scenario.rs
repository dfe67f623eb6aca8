#![no_main]

use libfuzzer_sys::fuzz_target;
use roomsim::evalkit::read_scenarios;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = read_scenarios(text);
    }
});
