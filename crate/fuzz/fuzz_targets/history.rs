#![no_main]
use barrier_homotopy::history::parse_param_history;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_param_history(text) {
            for (k, row) in rows.iter().enumerate() {
                assert_eq!(row.it, k + 1);
            }
        }
    }
});
