//! End-to-end runs of the `smallworld` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use tempfile::TempDir;

use smallworld_seir::calibration::CaseSeries;
use smallworld_seir::config::ScenarioConfig;
use smallworld_seir::graph::Graph;
use smallworld_seir::output::read_csv;

const SMALL: &str = r#"
label = "small"

[graph]
n = 1000
k = 10
p = 0.1

[run]
horizon = 60
replicas = 12
master_seed = 3

[regions]
n_regions = 10

[[schedule.phase]]
r = 0.08

[[schedule.phase]]
start_day = 25
r = 0.01

[[schedule.phase]]
start_day = 40
r = 0.03
check_fraction = 0.05
check_target = "long_edges"
"#;

fn smallworld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smallworld"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = smallworld(&["simulate", "--config", s(&cfg), "--out", s(dir), "--per-replica"]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "aggregate.csv"));
    for name in &names {
        let (pa, pb) = (a.join(name), b.join(name));
        if pa.is_file() {
            assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap(), "{name:?} differs");
        }
    }
    let replicas = std::fs::read_dir(a.join("replicas")).unwrap().count();
    assert_eq!(replicas, 12);

    let (header, rows) = read_csv(a.join("aggregate.csv")).unwrap();
    assert_eq!(rows.len(), 61);
    assert_eq!(header[0], "day");
    let first = std::fs::read_to_string(a.join("aggregate.csv")).unwrap();
    assert!(first.starts_with("# smallworld-seir "), "{}", first.lines().next().unwrap());
    assert!(first.lines().next().unwrap().contains("master_seed=3"));
}

#[test]
fn seed_override_changes_the_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, seed) in [(&a, "3"), (&b, "4")] {
        let out = smallworld(&["simulate", "--config", s(&cfg), "--out", s(dir), "--seed", seed]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let read = |d: &Path| read_csv(d.join("aggregate.csv")).unwrap().1;
    assert_ne!(read(&a), read(&b));
}

#[test]
fn config_errors_point_at_the_line() {
    let tmp = TempDir::new().unwrap();
    let bad = SMALL.replace("start_day = 40", "start_day = 20");
    let cfg = write(tmp.path(), "bad.toml", &bad);
    let out = smallworld(&["simulate", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    let line = bad.lines().position(|l| l.contains("start_day = 20")).unwrap() + 1;
    let err = stderr(&out);
    assert!(err.contains(&format!("bad.toml:{line}:")), "{err}");

    let typo = write(tmp.path(), "typo.toml", &SMALL.replace("horizon", "horizn"));
    let out = smallworld(&["simulate", "--config", s(&typo), "--out", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    let line = SMALL.lines().position(|l| l.contains("horizon")).unwrap() + 1;
    let err = stderr(&out);
    assert!(err.contains(&format!("typo.toml:{line}:")) && err.contains("horizn"), "{err}");
}

#[test]
fn sweep_rejects_bad_specs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let o = tmp.path().join("sweep");
    for param in ["phase.last.check_fraction=", "phase.last.colour=1,2", "phase.9.r=0.1"] {
        let out = smallworld(&["sweep", "--config", s(&cfg), "--param", param, "--out", s(&o)]);
        assert!(!out.status.success(), "{param} accepted");
        assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
    }
}

#[test]
fn sweep_writes_one_run_per_value() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let o = tmp.path().join("sweep");
    let out = smallworld(&[
        "sweep",
        "--config",
        s(&cfg),
        "--replicas",
        "4",
        "--param",
        "phase.last.check_fraction=0,0.1",
        "--out",
        s(&o),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (header, rows) = read_csv(o.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    let dir = header.iter().position(|h| h == "dir").unwrap();
    for row in &rows {
        assert!(o.join(&row[dir]).join("aggregate.csv").is_file());
    }
}

#[test]
fn graph_dump_round_trips() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("g.txt");
    let out = smallworld(&["graph-dump", "--n", "300", "--k", "6", "--p", "0.2", "--seed", "9", "--out", s(&path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    let g = Graph::read_edge_list(text.as_bytes()).unwrap();
    assert_eq!(g.edge_count(), 900);
    assert_eq!(g.seed(), 9);
    let direct = Graph::generate(g.params(), 9).unwrap();
    assert_eq!(direct.to_edge_list(), text);
}

#[test]
fn missing_and_malformed_data_are_reported() {
    let tmp = TempDir::new().unwrap();
    let cfg_text = SMALL.replace("master_seed = 3", "master_seed = 3\nseed_date = 2020-02-01");
    let cfg = write(tmp.path(), "small.toml", &cfg_text);

    let missing = tmp.path().join("nowhere.csv");
    let out = smallworld(&["calibrate", "--config", s(&cfg), "--data", s(&missing)]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nowhere.csv"), "{}", stderr(&out));

    let bad = write(tmp.path(), "bad.csv", "date,new_cases\n2020-02-01,3\n2020-02-31,4\n");
    let out = smallworld(&["calibrate", "--config", s(&cfg), "--data", s(&bad)]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("bad.csv") && err.contains("row 3"), "{err}");
}

#[test]
fn calibrate_recovers_a_synthetic_rate() {
    let tmp = TempDir::new().unwrap();
    let template = r#"
label = "synthetic"

[graph]
n = 3000
k = 20
p = 0.1

[run]
horizon = 80
replicas = 60
master_seed = 101
seed_date = 2020-01-01

[regions]
n_regions = 10

[calibration]
phase = 1
bounds = [0.001, 0.05]
grid_points = 7
search_replicas = 30
final_replicas = 60

[[schedule.phase]]
r = 0.055

[[schedule.phase]]
start_day = 35
r = 0.01
"#;
    let cfg = ScenarioConfig::from_toml_str(template, "synthetic").unwrap();
    let truth = smallworld_seir::output::run_scenario(&cfg).unwrap();
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let data = CaseSeries::new("synthetic", start, truth.stats.expected_confirmed.clone()).unwrap();
    let data_path = tmp.path().join("synthetic.csv");
    data.write(&data_path).unwrap();

    // Fit with different random numbers from those that made the data.
    let fit_cfg = write(tmp.path(), "fit.toml", &template.replace("master_seed = 101", "master_seed = 7"));
    let out_dir = tmp.path().join("fit");
    let out = smallworld(&["calibrate", "--config", s(&fit_cfg), "--data", s(&data_path), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("calibration.json")).unwrap()).unwrap();
    let r = json["fitted_r"].as_f64().unwrap();
    assert!((r - 0.01).abs() <= 0.002, "fitted {r}");
    assert_eq!(json["phase"].as_u64(), Some(1));
}
