#![no_main]

use libfuzzer_sys::fuzz_target;
use mimo_isar::config::FrameSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Some(frames) = FrameSpec::parse_list(s) {
            for f in frames {
                let _ = f.resolve(0.1);
            }
        }
    }
});
