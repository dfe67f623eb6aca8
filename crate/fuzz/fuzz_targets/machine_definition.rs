#![no_main]

use libfuzzer_sys::fuzz_target;
use roomsim::machine::MachineDefinition;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(def) = MachineDefinition::parse(text) {
            let again = serde_json::to_string(&def).unwrap();
            assert_eq!(MachineDefinition::parse(&again).unwrap(), def);
        }
    }
});
