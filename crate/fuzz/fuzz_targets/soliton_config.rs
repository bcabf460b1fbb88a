#![no_main]

use libfuzzer_sys::fuzz_target;
use tfx::io::parse_soliton_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_soliton_config(text) {
        assert!(c.positions.windows(2).all(|w| w[1] > w[0]));
        assert!(c.bounds.beta >= 0.0);
    }
});
