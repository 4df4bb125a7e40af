#![no_main]

use libfuzzer_sys::fuzz_target;
use otdf_cli::{validate_config, Overrides};

// a validated document, emitted as JSON, revalidates to the same run
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rc) = validate_config(text, None, &Overrides::default()) {
        let emitted = serde_json::to_string(&rc.document).unwrap();
        assert_eq!(validate_config(&emitted, None, &Overrides::default()).unwrap(), rc);
    }
});
