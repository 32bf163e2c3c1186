#![no_main]

use libfuzzer_sys::fuzz_target;
use ppv_core::tabular::parse_schema;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_schema(text);
    }
});
