use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use girf::build_time_grid;
use girf::models::ModelSpec;
use girf::oracles::kalman_filter;
use serde_json::Value;
use tempfile::TempDir;

fn girf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_girf"))
        .args(args)
        .current_dir(dir)
        .env_remove("GIRF_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("stdout is JSON lines"))
        .collect()
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const CBM: &str = r#""model": {"name": "correlated_bm", "params": {"d": 3, "alpha": 0.4}},
    "grid": {"n_obs": 8, "spacing": 1.0, "S": 3}"#;

#[test]
fn simulate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim.json",
        &format!(r#"{{"schema_version": 1, {CBM}, "seed": 21}}"#),
    );
    let cfg = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        let o = girf(&["simulate", "--config", cfg, "--out", out], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let c = girf(&["simulate", "--config", cfg, "--out", "c", "--seed", "22"], tmp.path());
    assert!(c.status.success());
    for f in ["states.csv", "observations.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
        assert_ne!(a, fs::read(tmp.path().join("c").join(f)).unwrap(), "{f}");
    }
    let states = read_rows(&tmp.path().join("a/states.csv"));
    assert_eq!(states.len(), 8 * 3 + 1);
    assert_eq!(states[0], vec![0.0, 0.0, 0.0, 0.0]);
    let prov: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("c/provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 22);
    assert_eq!(prov["config"]["seed"], 22);
}

#[test]
fn kalman_engine_matches_the_library_oracle() {
    let tmp = TempDir::new().unwrap();
    let body = format!(r#"{{"schema_version": 1, {CBM}, "filter": {{"engine": "kalman"}}, "seed": 5}}"#);
    let cfg = write_config(tmp.path(), "kf.json", &body);
    let o = girf(
        &["filter", "--config", cfg.to_str().unwrap(), "--out", "out"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reported = json_lines(&o)[0]["loglik"].as_f64().unwrap();

    let spec: ModelSpec =
        serde_json::from_str(r#"{"name": "correlated_bm", "params": {"d": 3, "alpha": 0.4}}"#).unwrap();
    let model = spec.build().unwrap().model;
    let rows = read_rows(&tmp.path().join("out/data.csv"));
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let data: Vec<Vec<f64>> = rows.iter().map(|r| r[1..].to_vec()).collect();
    let grid = build_time_grid(0.0, &times, 3).unwrap();
    let lg = model.linear_gaussian(&model.params().values()).unwrap();
    let oracle = kalman_filter(&lg, &grid, &data).unwrap().loglik;
    assert_eq!(reported, oracle);
}

#[test]
fn profile_feeds_mcap() {
    let tmp = TempDir::new().unwrap();
    let body = r#"{
        "schema_version": 1,
        "model": {"name": "correlated_bm", "params": {"d": 2}},
        "grid": {"n_obs": 30, "spacing": 1.0, "S": 2},
        "filter": {"engine": "girf", "J": 200, "guide": {"kind": "exact_gaussian", "B": 2}},
        "profile": {"parameter": "obs_sd", "values": [0.6, 0.75, 0.9, 1.05, 1.2, 1.35], "replicates": 3},
        "seed": 11
    }"#;
    let cfg = write_config(tmp.path(), "profile.json", body);
    let cfg = cfg.to_str().unwrap();
    let o = girf(&["profile", "--config", cfg, "--out", "out"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&tmp.path().join("out/profile.csv"));
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r.len() == 3 && r[1].is_finite()));

    let o = girf(&["mcap", "--config", cfg, "--out", "out"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = &json_lines(&o)[0];
    assert_eq!(summary["points"], 18);
    let (lo, hat, hi) = (
        summary["lower"].as_f64().unwrap(),
        summary["phi_hat"].as_f64().unwrap(),
        summary["upper"].as_f64().unwrap(),
    );
    assert!(0.6 <= lo && lo < hat && hat < hi && hi <= 1.35, "{summary}");
    assert!(tmp.path().join("out/mcap.json").exists());
}

#[test]
fn unknown_field_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let body = format!(r#"{{"schema_version": 1, {CBM}, "filter": {{"engine": "kalman", "particles": 3}}}}"#);
    let cfg = write_config(tmp.path(), "bad.json", &body);
    let o = girf(
        &["filter", "--config", cfg.to_str().unwrap(), "--out", "out"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("filter") && err.contains("particles"), "{err}");
}

#[test]
fn missing_linear_form_is_a_model_error() {
    let tmp = TempDir::new().unwrap();
    let body = r#"{"schema_version": 1, "model": {"name": "lorenz96", "params": {"d": 5}},
        "grid": {"n_obs": 3, "spacing": 0.1}, "filter": {"engine": "kalman"}}"#;
    let cfg = write_config(tmp.path(), "lorenz.json", body);
    let o = girf(
        &["filter", "--config", cfg.to_str().unwrap(), "--out", "out"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let body = r#"{
        "schema_version": 1,
        "task": "compare",
        "model": {"name": "lorenz96", "params": {"d": 6}},
        "grid": {"n_obs": 5, "spacing": 0.2, "S": 4},
        "compare": {"engines": [
            {"engine": "girf", "J": 100, "islands": 2, "guide": {"kind": "lookahead", "B": 2, "n_variability_sims": 5}},
            {"engine": "enkf", "J": 100}
        ]},
        "seed": 3
    }"#;
    let cfg = write_config(tmp.path(), "cmp.json", body);
    let cfg = cfg.to_str().unwrap();
    for (out, threads) in [("one", "1"), ("three", "3")] {
        let o = girf(
            &["run", "--config", cfg, "--out", out, "--threads", threads],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(tmp.path().join("one/cond_loglik.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("three/cond_loglik.csv")).unwrap());
}
