#![no_main]

use libfuzzer_sys::fuzz_target;
use roomsim::scan::{read_frame, write_frame};

fuzz_target!(|data: &[u8]| {
    let Ok(frame) = read_frame(data) else { return };
    let mut out = Vec::new();
    write_frame(&frame, &mut out).unwrap();
    let back = read_frame(&out).unwrap();
    assert_eq!(back.depths(), frame.depths());
});
