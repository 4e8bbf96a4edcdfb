#![no_main]

use libfuzzer_sys::fuzz_target;
use mimo_isar::export::decode_pgm;

fuzz_target!(|data: &[u8]| {
    let _ = decode_pgm(data);
});
