#![no_main]

//! Study files are parsed and validated; pricing is left out to keep runs
//! short.

use libfuzzer_sys::fuzz_target;
use parisian::config::parse_config;
use parisian::study::StudyConfig;

fuzz_target!(|s: &str| {
    if let Ok(cfg) = parse_config::<StudyConfig>(s) {
        if cfg.validate().is_ok() {
            assert!(!cfg.grids.is_empty());
            let _ = cfg.model.build();
        }
    }
});
