#![no_main]

use libfuzzer_sys::fuzz_target;
use tfx::io::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = parse_config(text) {
        for (k, v) in &map {
            assert!(!k.is_empty() && !k.contains('='));
            assert_eq!(v.trim(), v);
        }
    }
});
