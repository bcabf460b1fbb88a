//! Replays the checked-in fuzz seeds through the same entry points on stable.

use std::fs;
use std::path::PathBuf;

use tfx::io::{parse_config, parse_csv, parse_list, parse_soliton_config, StateRecord};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn state_record_seeds() {
    for (name, text) in seeds("state_record") {
        let decoded = StateRecord::from_json(&text);
        match name.as_str() {
            "ground_small.json" | "odd_small.json" => {
                let r = decoded.unwrap();
                assert_eq!(StateRecord::from_json(&r.to_json()).unwrap(), r);
                assert!(r.into_state(1e-10).is_ok(), "{name}");
            }
            _ => assert!(decoded.is_err(), "{name}"),
        }
    }
}

#[test]
fn config_seeds() {
    for (name, text) in seeds("config_file") {
        let ok = parse_config(&text).is_ok();
        assert_eq!(ok, !matches!(name.as_str(), "missing_eq.cfg" | "duplicate.cfg"), "{name}");
    }
}

#[test]
fn list_seeds() {
    for (name, text) in seeds("float_list") {
        assert_eq!(parse_list(&text).is_ok(), name != "bad.txt", "{name}");
    }
}

#[test]
fn csv_seeds() {
    for (name, text) in seeds("csv_table") {
        assert_eq!(parse_csv(&text).is_ok(), name != "ragged.csv", "{name}");
    }
}

#[test]
fn soliton_config_seeds() {
    for (name, text) in seeds("soliton_config") {
        assert_eq!(parse_soliton_config(&text).is_ok(), name != "unordered.json", "{name}");
    }
}
