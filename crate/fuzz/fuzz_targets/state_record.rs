#![no_main]

use libfuzzer_sys::fuzz_target;
use tfx::io::StateRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(record) = StateRecord::from_json(text) {
        // Re-encoding a decoded record must decode to the same record.
        let again = StateRecord::from_json(&record.to_json()).expect("re-encoded record decodes");
        assert_eq!(again, record);
        if record.n <= 1 << 14 {
            let _ = record.into_state(1e-10);
        }
    }
});
