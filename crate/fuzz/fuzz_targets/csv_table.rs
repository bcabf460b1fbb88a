#![no_main]

use libfuzzer_sys::fuzz_target;
use tfx::io::parse_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = parse_csv(text) {
        assert!(table.rows.iter().all(|r| r.len() == table.headers.len()));
    }
});
