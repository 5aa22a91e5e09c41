#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = bfm::data::parse_dataset_str(text) {
        // Whatever parses must survive a write/read cycle unchanged.
        let again = bfm::data::parse_dataset_str(&d.to_text()).expect("re-parse");
        assert_eq!(again.observations, d.observations);
        assert_eq!(again.name, d.name);
    }
});
