#![no_main]

use libfuzzer_sys::fuzz_target;
use onephase::field::GridSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(grid) = GridSpec::from_json(text) else { return };
    let again = GridSpec::from_json(&grid.to_json()).expect("serialized grid parses");
    assert!(again.compatible(&grid));
    assert!(grid.h() > 0.0 && !grid.is_empty());
});
