#![no_main]

use libfuzzer_sys::fuzz_target;
use tfx::io::parse_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(values) = parse_list(text) {
        assert!(values.iter().all(|v| v.is_finite()));
        let joined = values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
        assert_eq!(parse_list(&joined).unwrap(), values);
    }
});
