use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bfm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bfm"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("BFM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = bfm(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fit_mle_afst_report_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fit");
    ok(&["fit-mle", "--data", "bundled:afst", "--model", "bfm"], &out);
    let r = json(&out.join("fit.json"));
    assert!((r["nll"].as_f64().unwrap() - 53.6926).abs() < 1e-3);
    assert!((r["params"]["theta"].as_f64().unwrap() - 4.9472).abs() < 0.01);
    let aic = r["aic"].as_f64().unwrap();
    assert!((aic - (2.0 * 53.6926 + 8.0)).abs() < 2e-3);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "fit-mle");
    assert_eq!(m["flags"]["model"], "bfm");
    assert_eq!(m["flags"]["seed"], "2024");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(std::fs::read_to_string(out.join("fit.txt")).unwrap().contains("theta"));
}

#[test]
fn unknown_model_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = bfm(&["fit-mle", "--data", "bundled:afst", "--model", "weibull"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_flag_is_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(bfm(&["fit-mle"], dir.path()).status.code(), Some(2));
}

#[test]
fn fixed_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(
            &[
                "risks",
                "--params",
                "0.02,1.5,0.8,0.3",
                "--mc-draws",
                "20000",
                "--seed",
                "9",
            ],
            out,
        );
        ok(&["fit-mle", "--data", "bundled:efst", "--seed", "9"], out);
    }
    for f in ["risks.json", "fit.json", "fit.txt"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn run_conf_replays_run() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    ok(
        &[
            "fit-mle",
            "--data",
            "bundled:afst",
            "--model",
            "apd",
            "--starts",
            "3",
            "--seed",
            "11",
        ],
        &first,
    );
    let second = dir.path().join("second");
    let conf = first.join("run.conf");
    ok(&["fit-mle", "--config", conf.to_str().unwrap()], &second);
    assert_eq!(
        std::fs::read(first.join("fit.json")).unwrap(),
        std::fs::read(second.join("fit.json")).unwrap()
    );
}

#[test]
fn config_keys_and_overrides() {
    let dir = TempDir::new().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, "# defaults\ndata = bundled:afst\nmodel = facg\n").unwrap();
    let out = dir.path().join("o");
    ok(&["fit-mle", "--config", conf.to_str().unwrap(), "--model", "apd"], &out);
    assert_eq!(json(&out.join("fit.json"))["model"], "APD");

    std::fs::write(&conf, "data = bundled:afst\nmodle = bfm\n").unwrap();
    let o = bfm(&["fit-mle", "--config", conf.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));

    std::fs::write(&conf, "data = bundled:efst\ndump-draws = maybe\n").unwrap();
    let o = bfm(&["fit-bayes", "--config", conf.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bfm"))
        .args(["risks", "--params", "0.01,2.0,0.6,0.6", "--mc-draws", "0"])
        .env("BFM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn risks_from_params() {
    let dir = TempDir::new().unwrap();
    ok(
        &["risks", "--params", "0.01,2.0,0.6,0.6", "--mc-draws", "100000"],
        dir.path(),
    );
    let r = json(&dir.path().join("risks.json"));
    assert!((r["p1"]["f1"].as_f64().unwrap() - 0.0158).abs() < 5e-5);
    assert!((r["p1"]["f2"].as_f64().unwrap() - 0.9842).abs() < 5e-5);
    assert_eq!(r["p2_curve"].as_array().unwrap().len(), 9);
    let mc = r["monte_carlo"]["f1"].as_f64().unwrap();
    assert!((mc - 0.0158).abs() < 3.0 * (0.0158f64 * 0.9842 / 1e5).sqrt() + 1e-4);
}

#[test]
fn risks_argument_rules() {
    let dir = TempDir::new().unwrap();
    assert_eq!(bfm(&["risks"], dir.path()).status.code(), Some(2));
    let both = bfm(&["risks", "--params", "1,1,1,1", "--data", "bundled:afst"], dir.path());
    assert_eq!(both.status.code(), Some(2));
    assert_eq!(bfm(&["risks", "--params", "1,1,1"], dir.path()).status.code(), Some(2));
    assert_eq!(
        bfm(&["risks", "--params", "1,-1,1,1"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn risks_from_data_include_empirical() {
    let dir = TempDir::new().unwrap();
    ok(&["risks", "--data", "bundled:afst", "--mc-draws", "0"], dir.path());
    let r = json(&dir.path().join("risks.json"));
    assert!((r["empirical"]["f1"].as_f64().unwrap() - 17.0 / 33.0).abs() < 1e-12);
    assert!((r["p1"]["f1"].as_f64().unwrap() - 0.635).abs() < 0.005);
}

#[test]
fn fit_bayes_single_chain_and_draw_dump() {
    let dir = TempDir::new().unwrap();
    ok(
        &[
            "fit-bayes",
            "--data",
            "bundled:afst",
            "--chains",
            "1",
            "--iterations",
            "400",
            "--warmup",
            "200",
            "--dump-draws",
        ],
        dir.path(),
    );
    let r = json(&dir.path().join("posterior.json"));
    assert_eq!(r["rhat_available"], false);
    for p in r["summary"].as_array().unwrap() {
        assert!(p["rhat"].is_null());
    }
    assert!(std::fs::read_to_string(dir.path().join("posterior.txt"))
        .unwrap()
        .contains("unavailable"));
    let draws = std::fs::read_to_string(dir.path().join("draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 1 + 200);
    assert!(draws.lines().skip(1).all(|l| l.split(',').count() == 6));
}

#[test]
fn fit_bayes_default_draw_shape() {
    let dir = TempDir::new().unwrap();
    ok(&["fit-bayes", "--data", "bundled:afst", "--dump-draws"], dir.path());
    let draws = std::fs::read_to_string(dir.path().join("draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 1 + 4 * 1000);
    let r = json(&dir.path().join("posterior.json"));
    for p in r["summary"].as_array().unwrap() {
        assert!(p["rhat"].as_f64().unwrap() < 1.1, "{p}");
    }
}

#[test]
fn fit_bayes_rejects_zero_step() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        bfm(&["fit-bayes", "--data", "bundled:afst", "--eps", "0"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn compare_afst_ranks_bfm_first() {
    let dir = TempDir::new().unwrap();
    ok(&["compare", "--data", "bundled:afst"], dir.path());
    let r = json(&dir.path().join("compare.json"));
    let wins = r["wins"].as_array().unwrap();
    let bfm = wins.iter().find(|w| w["model"] == "BFM").unwrap();
    assert_eq!(bfm["wins"], 7);
    assert_eq!(r["models"].as_array().unwrap().len(), 6);
    let curves = bfm::data::parse_series_csv(&std::fs::read_to_string(dir.path().join("curves.csv")).unwrap()).unwrap();
    assert!(curves
        .iter()
        .any(|s| s.name == "empirical" && s.kind == bfm::data::SeriesKind::Rf));
    assert_eq!(
        curves.iter().filter(|s| s.kind == bfm::data::SeriesKind::Mrl).count(),
        7
    );
}

#[test]
fn compare_argument_rules() {
    let dir = TempDir::new().unwrap();
    let one = bfm(&["compare", "--data", "bundled:afst", "--models", "bfm"], dir.path());
    assert_eq!(one.status.code(), Some(2));
    let dup = bfm(
        &["compare", "--data", "bundled:afst", "--models", "bfm,BFM"],
        dir.path(),
    );
    assert_eq!(dup.status.code(), Some(2));
    let boot = bfm(
        &[
            "compare",
            "--data",
            "bundled:afst",
            "--models",
            "bfm,apd",
            "--bootstrap",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(boot.status.code(), Some(2));
}

#[test]
fn compat_series_and_determinism() {
    let dir = TempDir::new().unwrap();
    let args = [
        "compat",
        "--data",
        "bundled:afst",
        "--sets",
        "2",
        "--iterations",
        "300",
        "--warmup",
        "150",
        "--chains",
        "2",
    ];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&args, &a);
    ok(&args, &b);
    for f in ["compat-frf.csv", "compat-rf.csv", "compat.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let frf = bfm::data::parse_series_csv(&std::fs::read_to_string(a.join("compat-frf.csv")).unwrap()).unwrap();
    let names: Vec<&str> = frf.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["observed", "set-1", "set-2"]);
}

#[test]
fn compat_zero_sets_is_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        bfm(&["compat", "--data", "bundled:afst", "--sets", "0"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn ttt_strata() {
    let dir = TempDir::new().unwrap();
    ok(&["ttt", "--data", "bundled:afst"], dir.path());
    let r = json(&dir.path().join("ttt.json"));
    let strata = r["strata"].as_array().unwrap();
    assert_eq!(strata.len(), 3);
    assert_eq!(strata[2]["failures"], 33);

    let data = dir.path().join("one.csv");
    std::fs::write(
        &data,
        "# name: one\n# time_unit: h\n# cause_labels: c1=a; c2=b\n2.0,c1\n3.0,cen\n",
    )
    .unwrap();
    let out = dir.path().join("one");
    ok(&["ttt", "--data", data.to_str().unwrap(), "--stratum", "cause1"], &out);
    let r = json(&out.join("ttt.json"));
    assert_eq!(r["strata"][0]["turning_points"].as_array().unwrap().len(), 0);
    let series = bfm::data::parse_series_csv(&std::fs::read_to_string(out.join("ttt.csv")).unwrap()).unwrap();
    assert_eq!(series[0].x.len(), 1);
    let o = bfm(&["ttt", "--data", data.to_str().unwrap(), "--stratum", "cause2"], &out);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn malformed_data_is_data_error() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(
        &data,
        "# name: x\n# time_unit: h\n# cause_labels: c1=a; c2=b\n1.0,c1\n-2,c2\n",
    )
    .unwrap();
    let o = bfm(&["fit-mle", "--data", data.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = bfm(
        &["fit-mle", "--data", dir.path().join("missing.csv").to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sample_round_trips_through_fit() {
    let dir = TempDir::new().unwrap();
    ok(
        &[
            "sample",
            "--params",
            "0.3,1.5,0.8,0.4",
            "--count",
            "300",
            "--censor-at",
            "4",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("sample.csv")).unwrap();
    let d = bfm::data::parse_dataset_str(&text).unwrap();
    assert_eq!(d.len(), 300);
    assert!(d.observations.iter().all(|o| o.time <= 4.0));
    let fit = dir.path().join("fit");
    ok(
        &["fit-mle", "--data", dir.path().join("sample.csv").to_str().unwrap()],
        &fit,
    );
    assert!(json(&fit.join("fit.json"))["nll"].as_f64().unwrap().is_finite());
    assert_eq!(
        bfm(&["sample", "--params", "0.3,1.5,0.8,0.4", "--count", "0"], dir.path())
            .status
            .code(),
        Some(2)
    );
}
