#![no_main]

use libfuzzer_sys::fuzz_target;
use ringtheta::io::{read_series, read_table};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = read_table(text) {
        assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
    }
    if let Ok(s) = read_series(text, "P_0") {
        assert_eq!(s.times_ns.len(), s.values.len());
    }
});
