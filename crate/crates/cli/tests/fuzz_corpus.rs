//! Replays the fuzz corpus seeds through the fuzz targets' properties on stable.

use std::fs;
use std::path::PathBuf;

use otdf_cli::{validate_config, Overrides};
use otdf_core::statistics::io::{histogram_to_json, histogram_to_text, parse_json_histogram, parse_text_histogram};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn histogram_text_seeds_round_trip() {
    for (_, text) in seeds("histogram_text") {
        if let Ok(h) = parse_text_histogram(&text) {
            assert_eq!(parse_text_histogram(&histogram_to_text(&h)).unwrap(), h);
        }
    }
}

#[test]
fn histogram_json_seeds_round_trip() {
    for (_, text) in seeds("histogram_json") {
        if let Ok(l) = parse_json_histogram(&text) {
            assert_eq!(parse_json_histogram(&histogram_to_json(&l.histogram, l.model)).unwrap(), l);
        }
    }
}

#[test]
fn run_config_seeds_revalidate() {
    let mut accepted = 0;
    for (path, text) in seeds("run_config") {
        if let Ok(rc) = validate_config(&text, None, &Overrides::default()) {
            let emitted = serde_json::to_string(&rc.document).unwrap();
            assert_eq!(validate_config(&emitted, None, &Overrides::default()).unwrap(), rc, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted >= 3);
}
