#![no_main]

use libfuzzer_sys::fuzz_target;
use onephase::field::VectorFieldSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(x) = VectorFieldSpec::from_json(text) else { return };
    VectorFieldSpec::from_json(&x.to_json()).expect("serialized vector field parses");
    let _ = x.support_box();
    let _ = x.jet([0.1, -0.2]);
    let _ = x.norms(4);
});
