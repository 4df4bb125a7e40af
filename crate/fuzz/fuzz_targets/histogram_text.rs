#![no_main]

use libfuzzer_sys::fuzz_target;
use otdf_core::statistics::io::{histogram_to_text, parse_text_histogram};

// accepted input re-serializes to text that parses to the same histogram
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(hist) = parse_text_histogram(text) {
        assert_eq!(parse_text_histogram(&histogram_to_text(&hist)).unwrap(), hist);
    }
});
