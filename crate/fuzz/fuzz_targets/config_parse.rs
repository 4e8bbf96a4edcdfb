#![no_main]

use libfuzzer_sys::fuzz_target;
use mimo_isar::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // anything that parses must survive its own normal form
    if let Ok(cfg) = parse_config(text) {
        let normal = cfg.serialize();
        let again = parse_config(&normal).expect("normal form parses");
        assert_eq!(again.serialize(), normal);
    }
});
