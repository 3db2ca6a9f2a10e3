#![no_main]
use barrier_homotopy::parse_config_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config_str(text) {
        let again = parse_config_str(&cfg.to_config_string()).expect("serialized config parses");
        assert_eq!(again.to_config_string(), cfg.to_config_string());
    }
});
