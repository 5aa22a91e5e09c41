#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(entries) = bfm::config::parse_config_str(text) {
        let rendered: String = entries.iter().map(|e| format!("{} = {}\n", e.key, e.value)).collect();
        let again = bfm::config::parse_config_str(&rendered).expect("re-parse");
        assert_eq!(again.len(), entries.len());
    }
});
