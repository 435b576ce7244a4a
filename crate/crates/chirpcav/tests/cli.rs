use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chirpcav::config::RunConfig;

fn chirpcav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chirpcav")).current_dir(dir).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_and_positional_args_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!chirpcav(dir.path(), &[]).status.success());
    assert!(!chirpcav(dir.path(), &["fly"]).status.success());
    assert!(!chirpcav(dir.path(), &["simulate", "1.75"]).status.success());
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn seedless_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = chirpcav(dir.path(), &["optimum", "--seedless"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seedless"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn optimum_writes_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[optimum]\nphi_plus = \"1/9 pi\"\n").unwrap();
    let o = chirpcav(dir.path(), &["optimum", "--config", "run.toml", "--out", "res"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&dir.path().join("res/optimum.json"));
    assert_eq!(v["optimum"]["k"], 0);
    let area = v["optimum"]["area"].as_f64().unwrap();
    assert!((area - std::f64::consts::PI / (4.0 * 2f64.sqrt())).abs() < 1e-15);
    assert_eq!(v["target_phases"][1].as_f64().unwrap(), std::f64::consts::PI / 9.0);

    let m = json(&dir.path().join("res/manifest.json"));
    assert_eq!(m["command"], "optimum");
    assert_eq!(m["files"][0]["name"], "optimum.json");
    // the resolved config round-trips through the manifest
    let resolved = m["resolved_config"].as_str().unwrap();
    let original = RunConfig::parse(&fs::read_to_string(dir.path().join("run.toml")).unwrap()).unwrap().config;
    assert_eq!(RunConfig::parse(resolved).unwrap().config, original);
    assert_eq!(resolved, original.to_toml());
    // warnings about the undriven explicit pulses reach stderr and the manifest
    assert!(stderr(&o).contains("warning: pulses.plus.amplitude"));
    assert_eq!(m["warnings"].as_array().unwrap().len(), 2);
}

#[test]
fn config_errors_report_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[model]\nj_max = 4\n\n[pulses]\ntau = \"1 ns\"\n").unwrap();
    let o = chirpcav(dir.path(), &["simulate", "--config", "bad.toml"]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("bad.toml: config line 5"), "{e}");
    assert!(e.contains("tau"), "{e}");
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("weak.toml"),
        "[pulses.plus]\namplitude = \"0.05 pi\"\n[pulses.minus]\namplitude = \"0.05 pi\"\n[output]\ndir = \"weak\"\n",
    )
    .unwrap();
    let o = chirpcav(dir.path(), &["simulate", "--config", "weak.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("weak/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,cos_theta,p_ground,p_minus,p_plus,psi_minus,psi_plus,delta_psi,norm\n"));
    let v = json(&dir.path().join("weak/simulate.json"));
    assert!(v["max_norm_drift"].as_f64().unwrap() < 1e-8);
    let pm = v["final_populations"][1].as_f64().unwrap();
    let magnus = v["magnus_populations"][1].as_f64().unwrap();
    assert!((pm - magnus).abs() < 1e-4, "{pm} vs {magnus}");
    let m = json(&dir.path().join("weak/manifest.json"));
    let names: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["trajectory.csv", "simulate.json"]);
    assert_eq!(m["files"][0]["schema"], "chirpcav-trajectory/1");
}

#[test]
fn failed_run_leaves_existing_outputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("manifest.json"), "previous\n").unwrap();
    // no [scan] block: fails after parsing, before anything is written
    let o = chirpcav(dir.path(), &["scan"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("[scan]"));
    assert_eq!(fs::read_to_string(out.join("manifest.json")).unwrap(), "previous\n");
    assert_eq!(fs::read_dir(&out).unwrap().count(), 1);
}

#[test]
fn scan_runs_on_requested_threads() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("scan.toml"),
        "[scan]\n[[scan.axis]]\nparam = \"amplitude\"\nmin = \"0 au\"\nmax = \"0.02 pi\"\npoints = 2\n",
    )
    .unwrap();
    let o = chirpcav(dir.path(), &["scan", "--config", "scan.toml", "--threads", "2", "--out", "s"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("scan: 2/2"));
    let m = json(&dir.path().join("s/manifest.json"));
    assert_eq!(m["threads"], 2);
    assert_eq!(m["files"][0]["schema"], "chirpcav-scan/1");
    let s = json(&dir.path().join("s/scan.json"));
    assert_eq!(s["failed"], 0);
    assert_eq!(s["shape"][0], 2);
    let csv = fs::read_to_string(dir.path().join("s/scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
