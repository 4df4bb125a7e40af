#![no_main]

use libfuzzer_sys::fuzz_target;
use otdf_core::statistics::io::{histogram_to_json, parse_json_histogram};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(loaded) = parse_json_histogram(text) {
        let again = parse_json_histogram(&histogram_to_json(&loaded.histogram, loaded.model)).unwrap();
        assert_eq!(again, loaded);
    }
});
