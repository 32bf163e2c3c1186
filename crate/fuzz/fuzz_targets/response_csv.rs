#![no_main]

use libfuzzer_sys::fuzz_target;
use ppv_core::verify::read_responses;

fuzz_target!(|data: &[u8]| {
    if let Ok((names, rows)) = read_responses(data, "fuzz") {
        for r in &rows {
            assert_eq!(r.values.len(), names.len() + 2);
        }
    }
});
