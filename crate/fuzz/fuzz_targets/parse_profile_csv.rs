#![no_main]

use libfuzzer_sys::fuzz_target;
use onephase::ode1d::{Profile1D, ProfileMeta};

// First line: the JSON sidecar. Remaining lines: the profile CSV.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (head, csv) = text.split_once('\n').unwrap_or((text, ""));
    let Ok(meta) = serde_json::from_str::<ProfileMeta>(head) else { return };
    let Ok(p) = Profile1D::from_csv(csv, &meta) else { return };
    assert!(!p.is_empty());
    assert!(p.t.windows(2).all(|w| w[1] > w[0]));
    let _ = p.eval(0.0);
});
