//! Replays the checked-in fuzz corpora through the same round-trip checks the
//! fuzz targets make, so regressions show up in a plain `cargo test`.

use std::path::PathBuf;

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<(PathBuf, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter_map(|p| {
            std::fs::read(&p)
                .ok()
                .and_then(|b| String::from_utf8(b).ok())
                .map(|t| (p, t))
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus {target}");
    out
}

#[test]
fn dataset_corpus_round_trips() {
    for (path, text) in corpus("parse_dataset") {
        let Ok(d) = bfm::data::parse_dataset_str(&text) else {
            continue;
        };
        let again = bfm::data::parse_dataset_str(&d.to_text()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(again.observations, d.observations, "{}", path.display());
    }
}

#[test]
fn series_corpus_round_trips() {
    for (path, text) in corpus("parse_series_csv") {
        let Ok(series) = bfm::data::parse_series_csv(&text) else {
            continue;
        };
        let csv = bfm::data::series_to_csv(&series).unwrap();
        assert_eq!(bfm::data::parse_series_csv(&csv).unwrap(), series, "{}", path.display());
        bfm::data::series_to_svg(&series).unwrap();
    }
}

#[test]
fn config_corpus_round_trips() {
    for (path, text) in corpus("parse_config") {
        let Ok(entries) = bfm::config::parse_config_str(&text) else {
            continue;
        };
        let rendered: String = entries.iter().map(|e| format!("{} = {}\n", e.key, e.value)).collect();
        assert_eq!(
            bfm::config::parse_config_str(&rendered).unwrap().len(),
            entries.len(),
            "{}",
            path.display()
        );
    }
}

#[test]
fn params_corpus_is_positive() {
    for (_, text) in corpus("parse_params") {
        if let Ok(v) = bfm::config::parse_params(&text) {
            assert!(v.iter().all(|x| *x > 0.0 && x.is_finite()));
        }
    }
}
