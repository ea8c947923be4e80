#![no_main]

use libfuzzer_sys::fuzz_target;
use onephase::solver::SolveConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = SolveConfig::from_json(text) else { return };
    assert!(cfg.validate().is_ok());
});
