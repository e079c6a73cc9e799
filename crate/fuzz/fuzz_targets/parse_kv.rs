#![no_main]

use libfuzzer_sys::fuzz_target;
use parisian::config::parse_kv;

fuzz_target!(|s: &str| {
    if let Ok(v) = parse_kv(s) {
        assert!(v.is_object());
    }
});
