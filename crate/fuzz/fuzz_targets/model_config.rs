#![no_main]

//! Model files must either be rejected or build a model whose coefficients
//! can be evaluated.

use libfuzzer_sys::fuzz_target;
use parisian::config::parse_config;
use parisian::models::ModelParams;

fuzz_target!(|s: &str| {
    let Ok(params) = parse_config::<ModelParams>(s) else {
        return;
    };
    if let Ok(model) = params.build() {
        for x in [-1.0, 0.0, 4.5] {
            let _ = model.drift(0.0, x);
            let _ = model.diffusion_sq(0.0, x);
        }
    }
});
