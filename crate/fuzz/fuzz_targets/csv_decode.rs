#![no_main]

use libfuzzer_sys::fuzz_target;
use mimo_isar::export::decode_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = decode_csv(text);
    }
});
