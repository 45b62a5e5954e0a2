//! The trajectory CSV reader must never panic on malformed input: any
//! byte stream is either a list of records or a Csv error.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = suslov::trajectory::read_csv(std::io::Cursor::new(data));
});
