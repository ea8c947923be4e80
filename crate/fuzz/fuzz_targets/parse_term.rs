#![no_main]

use libfuzzer_sys::fuzz_target;
use onephase::potentials::ReactionTerm;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(term) = ReactionTerm::from_json(text) else { return };
    let again = ReactionTerm::from_json(&term.to_json()).expect("serialized term parses");
    assert_eq!(again.support(), term.support());
    let t = term.support();
    for k in 0..=8 {
        let s = t * k as f64 / 8.0;
        let _ = (term.f(s), term.fprime(s), term.potential(s));
    }
});
