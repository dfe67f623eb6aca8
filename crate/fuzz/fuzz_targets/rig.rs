#![no_main]

use libfuzzer_sys::fuzz_target;
use roomsim::scan::read_rig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = read_rig(text);
    }
});
