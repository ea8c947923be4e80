#![no_main]

use libfuzzer_sys::fuzz_target;
use onephase::field::{GridSpec, ScalarField};

// A fixed small grid keeps allocations bounded; grid parsing has its own target.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let grid = GridSpec::square(0.0, 1.0, 0.25).expect("grid");
    let Ok(u) = ScalarField::from_csv(text, &grid) else { return };
    let again = ScalarField::from_csv(&u.to_csv(), &grid).expect("serialized field parses");
    assert_eq!(again.values().len(), grid.len());
});
