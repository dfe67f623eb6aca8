#![no_main]

use libfuzzer_sys::fuzz_target;
use roomsim::surface::VolumeHeader;

// The header is followed by raw sample bytes after the first NUL.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let Ok(text) = std::str::from_utf8(&data[..split]) else { return };
    let Ok(header) = VolumeHeader::parse(text) else { return };
    let raw = data.get(split + 1..).unwrap_or_default();
    if let Ok(vol) = header.decode(raw) {
        assert_eq!(Some(vol.samples().len()), header.sample_count());
    }
});
