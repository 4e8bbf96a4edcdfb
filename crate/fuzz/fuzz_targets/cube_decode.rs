#![no_main]

use libfuzzer_sys::fuzz_target;
use mimo_isar::cubefile::{decode_cube, decode_samples};
use mimo_isar::params::RadarParams;

const MAX_INPUT_SIZE: usize = 1 << 20;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT_SIZE {
        return;
    }
    let _ = decode_samples(data);
    let _ = decode_cube(data, &RadarParams::awr1843_measurement());
});
