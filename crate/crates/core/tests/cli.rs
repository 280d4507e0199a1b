use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scbank::Scenario;

const BIN: &str = env!("CARGO_BIN_EXE_scbank");

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scbank(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `s` (without re-validating) and returns its path.
fn write_scenario(dir: &Path, name: &str, s: &Scenario) -> String {
    let path = dir.join(name);
    fs::write(&path, s.to_toml_string().unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn short_event() -> Scenario {
    let mut s = Scenario::load(scenarios().join("frequency_event.toml")).unwrap();
    s.sim.t_end = 3.0;
    s
}

#[test]
fn shipped_scenarios_validate() {
    for f in ["frequency_event", "large_disturbance", "lvrt"] {
        let p = scenarios().join(format!("{f}.toml"));
        let o = scbank(&["validate", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{f}: {}", stderr(&o));
    }
}

#[test]
fn step_above_electromechanical_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = short_event();
    s.sim.dt = 0.05;
    let p = write_scenario(dir.path(), "s.toml", &s);
    let o = scbank(&["validate", &p]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sim.dt"), "{}", stderr(&o));
}

#[test]
fn every_violation_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = short_event();
    s.control.gate.u_ch_start = 2.8;
    s.control.pq.tau_c = -1.0;
    let p = write_scenario(dir.path(), "s.toml", &s);
    let o = scbank(&["run", &p, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("control.gate"), "{err}");
    assert!(err.contains("control.pq.tau_c"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_keys_and_missing_files_are_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = short_event().to_toml_string().unwrap();
    text = text.replace("[sim]", "[sim]\nsolver = \"rk45\"");
    let p = dir.path().join("s.toml");
    fs::write(&p, text).unwrap();
    assert_eq!(code(&scbank(&["validate", p.to_str().unwrap()])), 2);
    assert_eq!(code(&scbank(&["validate", "/nonexistent/s.toml"])), 2);
}

#[test]
fn run_writes_timeseries_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(dir.path(), "s.toml", &short_event());
    let out = dir.path().join("out");
    let o = scbank(&["run", &p, "--out", out.to_str().unwrap(), "--seed-echo", "42", "--window", "0.25"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut rdr = csv::Reader::from_path(out.join("timeseries.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert!(header.iter().any(|h| h == "frequency_hz"));
    assert_eq!(rdr.records().count(), 301);

    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["seed_echo"], 42);
    assert_eq!(m["metrics"]["rocof_window_s"], 0.25);
    assert!(m["metrics"]["nadir_hz"].as_f64().unwrap() < 60.0);
    assert_eq!(m["engine"]["method"], "rk4");
}

#[test]
fn numeric_abort_exits_with_three_and_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = short_event();
    s.grid.disturbances[0].magnitude = 1e308;
    let p = write_scenario(dir.path(), "s.toml", &s);
    let out = dir.path().join("out");
    let o = scbank(&["run", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"));
    assert!(out.join("timeseries.csv").exists());
}

#[test]
fn one_point_sweep_matches_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = short_event();
    let p = write_scenario(dir.path(), "s.toml", &s);
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "[[axis]]\npath = \"bank.initial_voltage\"\nvalues = [2.5]\n").unwrap();
    let out = dir.path().join("sweep");
    let o = scbank(&["sweep", &p, spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut single = s.clone();
    single.bank.initial_voltage = Some(2.5);
    let m = scbank::run(&single).unwrap().metrics(single.sim.rocof_window).unwrap();
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let col = |name: &str| row[header.iter().position(|h| h == name).unwrap()].to_owned();
    assert_eq!(col("nadir_hz"), m.nadir_hz.to_string());
    assert_eq!(col("avg_rocof_hz_per_s"), m.avg_rocof_hz_per_s.to_string());
    assert!(out.join("summary.json").exists());
}

#[test]
fn reduce_study_writes_tables_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rs");
    let cell = scenarios().join("cell.toml");
    let current = scenarios().join("current.toml");
    let o = scbank(&[
        "reduce-study",
        cell.to_str().unwrap(),
        current.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv::Reader::from_path(out.join("mape.csv")).unwrap().records().count();
    assert_eq!(rows, 7);
    for v in ["full", "m1-5", "m1-1", "m1-0", "ideal-at-rated"] {
        assert!(out.join(format!("trace_{v}.csv")).exists(), "{v}");
    }
}
