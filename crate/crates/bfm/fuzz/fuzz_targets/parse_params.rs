#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = bfm::config::parse_params(text) {
        assert!(v.iter().all(|x| *x > 0.0 && x.is_finite()));
        if v.len() == 4 {
            let _ = bfm::BfmParams::from_slice(&v);
        }
    }
});
