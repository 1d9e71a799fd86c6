//! End-to-end runs of the `eth-lab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eth_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eth-lab")).current_dir(dir).args(args).env("RUST_LOG", "info").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small chain with statistics thresholds low enough for its few levels.
fn small_config(dir: &Path) -> String {
    let json = r#"{
        "model": {"n_qubits": 10},
        "operators": ["T10", "T11"],
        "spins": [1],
        "variance": {"min_diag": 3, "min_off": 5},
        "fscan": {"min_count": 5}
    }"#;
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn spectrum_n4_dimensions_and_cache_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let first = eth_lab(dir.path(), &["spectrum", "--n", "4", "--cache", "c", "--out", "o"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stderr(&first).contains("diagonalized 3 blocks, loaded 0 from cache"));
    let csv = fs::read_to_string(dir.path().join("o/spectrum_summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').take(2).collect()).collect();
    assert_eq!(rows, vec![vec!["0", "2"], vec!["1", "3"], vec!["2", "1"]]);
    let second = eth_lab(dir.path(), &["spectrum", "--n", "4", "--cache", "c", "--out", "o"]);
    assert!(second.status.success());
    assert!(stderr(&second).contains("diagonalized 0 blocks, loaded 3 from cache"));
    assert_eq!(fs::read_to_string(dir.path().join("o/spectrum_summary.csv")).unwrap(), csv);
}

#[test]
fn too_short_chain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = eth_lab(dir.path(), &["spectrum", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("N >= 2"));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"model": {"n_qubits": 6}, "window": {}}"#).unwrap();
    let o = eth_lab(dir.path(), &["dos", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"));
}

#[test]
fn oversized_chain_is_refused_with_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let o = eth_lab(dir.path(), &["spectrum", "--paper-defaults"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("estimated peak memory for N = 18"));
}

#[test]
fn validate_passes_and_clamps() {
    let dir = tempfile::tempdir().unwrap();
    let o = eth_lab(dir.path(), &["validate", "--n", "9", "--no-cache", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("clamping N = 9"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/validate.json")).unwrap()).unwrap();
    assert_eq!(json["summary"]["n_qubits"], 8);
    assert_eq!(json["summary"]["passed"], true);
}

#[test]
fn injected_coefficient_fault_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let o = eth_lab(dir.path(), &["validate", "--n", "5", "--no-cache", "--inject-cg-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("worst: wigner_eckart"));
}

#[test]
fn forbidden_sector_names_the_triangle_rule() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"model": {"n_qubits": 6}, "spins": [0]}"#).unwrap();
    let o = eth_lab(dir.path(), &["hist", "--config", "c.json", "--no-cache"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("triangle rule"), "{}", stderr(&o));
    fs::write(dir.path().join("d.json"), r#"{"model": {"n_qubits": 6}, "spins": [7]}"#).unwrap();
    let o = eth_lab(dir.path(), &["gapstats", "--config", "d.json", "--no-cache"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not exist at N = 6"));
}

#[test]
fn all_outputs_are_deterministic_and_hashed() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let a = eth_lab(dir.path(), &["all", "--config", &config, "--out", "a", "--cache", "ca", "--threads", "1"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = eth_lab(dir.path(), &["all", "--config", &config, "--out", "b", "--no-cache", "--threads", "3"]);
    assert!(b.status.success(), "{}", stderr(&b));
    let hash = serde_json::from_str::<serde_json::Value>(&fs::read_to_string(dir.path().join("a/spectrum.json")).unwrap()).unwrap()["config_hash"]
        .as_str()
        .unwrap()
        .to_string();
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in [
        "bands_T10.csv",
        "dos.csv",
        "fscan_T11.csv",
        "gapstats_hist.csv",
        "hist_T10_summary.csv",
        "varratio_T10.csv",
        "validate.json",
    ] {
        assert!(names.iter().any(|n| n == name), "missing {name}");
    }
    for name in &names {
        let x = fs::read(dir.path().join("a").join(name)).unwrap();
        let y = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name:?} differs between runs");
        assert!(String::from_utf8_lossy(&x).contains(&hash), "{name:?} lacks the config hash");
    }
    let fscan = fs::read_to_string(dir.path().join("a/fscan_T10.csv")).unwrap();
    let header = fscan.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.ends_with("count,mean,variance,dos,f_magnitude,reliable"));
    assert!(fscan.contains(",false\n") && fscan.contains(",true\n"));
    let varratio = fs::read_to_string(dir.path().join("a/varratio_T10.csv")).unwrap();
    assert!(varratio.contains("s,center,mean,std,stderr,window_count,skipped"));
}
