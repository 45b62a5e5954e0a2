//! The configuration parser must never panic, whatever the file contents:
//! any input is either a valid RunConfig or a Config error.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = suslov::config::parse_config_str(text);
    }
});
