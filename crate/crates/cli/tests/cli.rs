use singavoid_core::metrics::MetricsReport;
use singavoid_core::ScenarioConfig;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn singavoid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singavoid"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = singavoid(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// A short copy of the three-push scenario so the tests stay quick.
fn short_config(dir: &Path) -> PathBuf {
    let mut cfg = singavoid_core::config::parse_scenario(&scenario("complemented_three_push.json")).unwrap();
    cfg.duration = 4.5;
    let p = dir.join("short.json");
    std::fs::write(&p, cfg.to_json_string()).unwrap();
    p
}

fn run_into(config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
}

fn read(p: PathBuf) -> Vec<u8> {
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in ["default.json", "conventional_failure.json", "complemented_three_push.json"] {
        let out = ok(&["validate", "--config", scenario(name).to_str().unwrap()]);
        assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
    }
}

#[test]
fn validate_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"control_period": -0.01}"#).unwrap();
    let out = singavoid(&["validate", "--config", p.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("control_period"));

    std::fs::write(&p, "{\n  \"seed\": 1,\n  \"sede\": 2\n}").unwrap();
    let out = singavoid(&["validate", "--config", p.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_into(&cfg, &a, &[]);
    run_into(&cfg, &b, &[]);
    for f in ["log.jsonl", "log.csv", "metrics.json", "config.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let c = dir.path().join("c");
    run_into(&cfg, &c, &["--seed", "8"]);
    assert_ne!(read(a.join("log.jsonl")), read(c.join("log.jsonl")));
}

#[test]
fn written_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let first = dir.path().join("first");
    run_into(&cfg, &first, &["--mode", "conventional", "--seed", "11"]);
    let resolved = ScenarioConfig::from_json_str(std::str::from_utf8(&read(first.join("config.json"))).unwrap()).unwrap();
    assert_eq!(resolved.seed, 11);
    assert_eq!(resolved.mode, singavoid_core::ControllerMode::Conventional);
    let second = dir.path().join("second");
    run_into(&first.join("config.json"), &second, &[]);
    assert_eq!(read(first.join("log.jsonl")), read(second.join("log.jsonl")));
    assert_eq!(read(first.join("config.json")), read(second.join("config.json")));
}

#[test]
fn metrics_verb_matches_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out = dir.path().join("run");
    run_into(&cfg, &out, &[]);
    let stored: MetricsReport = serde_json::from_slice(&read(out.join("metrics.json"))).unwrap();
    assert_eq!(stored.episodes.len(), 1);
    assert!(stored.mae_mm.is_some());
    for log in ["log.jsonl", "log.csv"] {
        let text = ok(&["metrics", "--log", out.join(log).to_str().unwrap()]).stdout;
        let report: MetricsReport = serde_json::from_slice(&text).unwrap();
        assert_eq!(report, stored, "{log}");
    }
    let measured = dir.path().join("measured.json");
    ok(&[
        "metrics",
        "--log",
        out.join("log.jsonl").to_str().unwrap(),
        "--compare",
        "measured",
        "--out",
        measured.to_str().unwrap(),
    ]);
    let report: MetricsReport = serde_json::from_slice(&read(measured)).unwrap();
    assert_eq!(report.compare, singavoid_core::config::MetricsCompare::Measured);
    assert_eq!(report.episodes, stored.episodes);
}

#[test]
fn metrics_verb_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("log.jsonl");
    std::fs::write(&p, "{\"tick\": 0}\n").unwrap();
    assert!(!singavoid(&["metrics", "--log", p.to_str().unwrap()]).status.success());
    assert!(!singavoid(&["metrics", "--log", dir.path().join("missing.jsonl").to_str().unwrap()]).status.success());
}

#[test]
fn sweep_writes_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    ok(&[
        "sweep",
        "--config",
        scenario("complemented_three_push.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--rows",
        "psi:0.5:0.66:17",
        "--cols",
        "z:0.76:0.8:3",
    ]);
    let mut rd = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), singavoid_cli::sweep::SWEEP_COLUMNS);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 17 * 3);
    let omega: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(omega.iter().all(|o| (0.0..=180.0).contains(o)));
    // the pair (3,4) fold crosses this band of psi
    assert!(omega.iter().cloned().fold(f64::INFINITY, f64::min) < 2.0);
    assert!(omega.iter().cloned().fold(0.0, f64::max) > 5.0);
}

#[test]
fn bad_arguments_fail() {
    assert!(!singavoid(&["run", "--mode", "adaptive"]).status.success());
    assert!(!singavoid(&["sweep", "--rows", "psi:1:0:3"]).status.success());
    assert!(!singavoid(&["validate", "--config", "/nonexistent/scenario.json"]).status.success());
}
