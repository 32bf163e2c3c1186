#![no_main]

use libfuzzer_sys::fuzz_target;
use ppv_core::tabular::{read_csv, write_csv_to, SchemaSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(d) = read_csv(data, &SchemaSpec::default(), "fuzz") else {
        return;
    };
    // whatever parses must survive a write and re-read under its own schema
    let mut out = Vec::new();
    write_csv_to(&d, &mut out).unwrap();
    let again = read_csv(out.as_slice(), &SchemaSpec::Fixed(d.schema().to_vec()), "fuzz").unwrap();
    assert_eq!(again.n_rows(), d.n_rows());
});
