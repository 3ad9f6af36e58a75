use serde_json::Value;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fermi-crg")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = run(&full);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap(), v)
}

#[test]
fn free_theory_matches_exact_diagonalization() {
    let (code, v) = json(&["free-theory", "--L", "2", "--beta", "5"]);
    assert_eq!(code, 0);
    let geom = crg::honeycomb::HoneycombGeometry::new(2).unwrap();
    let ed = crg::ed::free_energy_at(&geom, 5.0, 0.0).unwrap();
    let f = v["result"]["f_beta"].as_f64().unwrap();
    assert!((f - ed).abs() <= 1e-10 * ed.abs(), "{f} vs {ed}");
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["L"], 2);
    assert_eq!(v["result"]["fermi_points"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_preset_exits_with_two() {
    let out = run(&["check", "--preset", "no-such-preset"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn invalid_values_exit_with_two() {
    for args in [["free-theory", "--beta", "-1"], ["free-theory", "--L", "0"], ["uv-flow", "--theta", "1.5"]] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_is_layered_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "L = 2\nbeta = 3.0\nseed = 11\n").unwrap();
    let path = cfg.to_str().unwrap();
    let (_, v) = json(&["--config", path, "free-theory", "--beta", "1.5"]);
    assert_eq!(v["config"]["L"], 2);
    assert_eq!(v["config"]["beta"], 1.5);
    assert_eq!(v["config"]["seed"], 11);

    std::fs::write(&cfg, "gamma = 1\n").unwrap();
    assert_eq!(run(&["--config", path, "free-theory"]).status.code(), Some(2));
}

#[test]
fn artifacts_are_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["--out-dir", out, "uv-flow", "--M", "8", "--max-order", "2"];
    assert!(run(&args).status.success());
    let first = std::fs::read(dir.path().join("uv-flow.json")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("flow.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "h,zeta,v,z,delta,e,ebar");
    assert_eq!(csv.lines().count(), 1 + 8);
    // The written config (which names the same out_dir) reproduces the report.
    let cfg = dir.path().join("config.toml");
    let args2 = ["--config", cfg.to_str().unwrap(), "uv-flow", "--M", "8"];
    assert!(run(&args2).status.success());
    assert_eq!(std::fs::read(dir.path().join("uv-flow.json")).unwrap(), first);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = run(&["--json", "--seed", "5", "bbf", "--s", "3", "--cluster-shape", "4,2,4", "--draws", "4"]);
    let b = run(&["--json", "--seed", "5", "bbf", "--s", "3", "--cluster-shape", "4,2,4", "--draws", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["--json", "--seed", "6", "bbf", "--s", "3", "--cluster-shape", "4,2,4", "--draws", "4"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn diagrams_agree_with_engine() {
    let (code, v) = json(&["diagrams", "--N", "2", "--L", "1", "--beta", "2", "--M", "3", "--U", "0.7"]);
    assert_eq!(code, 0);
    let d = v["result"]["E_T_diagrams"]["re"].as_f64().unwrap();
    let e = v["result"]["E_T_engine"]["re"].as_f64().unwrap();
    assert!((d - e).abs() <= 1e-10 * e.abs());
    assert_eq!(v["result"]["count_all"], "4");
    assert_eq!(v["result"]["count_connected"], "3");
}

#[test]
fn bbf_free_energy_matches_diagrams() {
    let (code, v) = json(&["bbf", "free-energy", "--N", "2", "--M", "4"]);
    assert_eq!(code, 0);
    assert!(v["result"]["rel_err"].as_f64().unwrap() < 1e-10);
}

#[test]
fn symmetry_and_oracle_pass() {
    let (code, v) = json(&["symmetry", "--L", "3", "--beta", "3", "--M", "2"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["ops"].as_array().unwrap().len(), 9);
    let (code, v) = json(&["oracle", "--L", "1", "--beta", "2", "--U", "0.5"]);
    assert_eq!(code, 0);
    assert!((v["result"]["density"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["result"]["coefficients"].as_array().unwrap().len(), 3);
}

#[test]
fn ir_flow_tracks_couplings_on_rotation_grids() {
    let (code, v) = json(&["ir-flow", "--L", "12", "--beta", "16", "--M", "2"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["running_couplings"], true);
    assert_eq!(v["result"]["h_beta"], -3);
}

#[test]
fn check_all_on_defaults_exits_zero() {
    let (code, v) = json(&["check", "--all"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["criteria"].as_array().unwrap().len(), 14);
    assert_eq!(v["result"]["unexpected_failures"].as_array().unwrap().len(), 0);
}

#[test]
fn check_presets_by_name_and_number() {
    assert!(run(&["check", "--preset", "wick"]).status.success());
    assert!(run(&["check", "--preset", "criterion-11"]).status.success());
    assert_eq!(run(&["check"]).status.code(), Some(2));
}
