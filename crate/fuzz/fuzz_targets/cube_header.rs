#![no_main]

use libfuzzer_sys::fuzz_target;
use mimo_isar::cubefile::CubeHeader;

fuzz_target!(|data: &[u8]| {
    if let Ok(h) = CubeHeader::decode(data) {
        assert_eq!(CubeHeader::decode(&h.encode()).ok(), Some(h));
    }
});
