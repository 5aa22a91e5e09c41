#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(series) = bfm::data::parse_series_csv(text) {
        let csv = bfm::data::series_to_csv(&series).expect("parsed series are valid");
        assert_eq!(bfm::data::parse_series_csv(&csv).expect("re-parse"), series);
        let _ = bfm::data::series_to_svg(&series);
    }
});
