use std::fs;
use std::process::{Command, Output};

use tempfile::tempdir;

fn buruli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_buruli"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_artifacts_and_refuses_reuse() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("r");
    let out_s = out.to_str().unwrap();
    let args = [
        "run", "--scenario", "s3", "--grid", "16x12", "--horizon", "1", "--snapshots", "0.5", "--seed", "4", "--out",
        out_s,
    ];
    let o = buruli(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"valid\""));
    assert!(manifest.contains("rng_seed = 4"));
    assert!(manifest.contains("nx = 16"));
    assert!(manifest.contains("scenario = \"S3\""));
    assert!(out.join("summary.csv").is_file());
    for t in ["t00000.000", "t00000.500", "t00001.000"] {
        for f in ["u", "m", "v", "n"] {
            assert!(out.join("snapshots").join(format!("{t}_{f}.csv")).is_file());
            assert!(out.join("snapshots").join(format!("{t}_{f}.pgm")).is_file());
        }
    }
    let again = buruli(&args);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("already holds a run"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[parameters]\ngamma1 = 1e-3\n[grid]\nnx = 10\nny = 10\n[scenario]\nhorizon = 0.5\nsnapshots = [0.5]\n[output]\nrasters = false\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = buruli(&["run", "--config", cfg.to_str().unwrap(), "--grid", "12", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("nx = 12"));
    assert!(manifest.contains("g1 = 0.01"), "{manifest}");
    assert!(!out.join("snapshots").join("t00000.500_u.pgm").exists());
}

#[test]
fn bad_config_reports_line() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[grid]\nnx = 10\n\n[parameters]\nD_m = -1.0\n").unwrap();
    let o = buruli(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("d_m"), "{err}");

    fs::write(&cfg, "[grid]\nnx = 10\nbogus = 3\n").unwrap();
    let o = buruli(&["validate", "--config", cfg.to_str().unwrap()]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains('3'), "{err}");
}

#[test]
fn compare_scenarios_and_directories() {
    let dir = tempdir().unwrap();
    let c1 = dir.path().join("c1");
    let common = ["--grid", "12", "--horizon", "1", "--snapshots", "0.5"];
    let mut args = vec!["compare", "s1", "s4", "--out", c1.to_str().unwrap()];
    args.extend(common);
    let o = buruli(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("(S4 linear) - (S1 linear)"));
    let report = fs::read_to_string(c1.join("diff.csv")).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert!(c1.join("diff").join("t00001.000_u.csv").is_file());

    let c2 = dir.path().join("c2");
    let a = c1.join("a");
    let b = c1.join("b");
    let o = buruli(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--out", c2.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(c1.join("diff.csv")).unwrap(), fs::read(c2.join("diff.csv")).unwrap());

    let o = buruli(&["compare", "s1", "nowhere", "--out", c2.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn validate_prints_checks() {
    let o = buruli(&["validate", "--scenario", "5", "--grid", "10", "--horizon", "0.2", "--model", "nonlinear"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("S5 Nonlinear"));
    assert!(s.contains("ok   nonnegativity"));
    assert!(s.contains("ok   mycolactone_bound"));
}

#[test]
fn lattice_study_writes_tables() {
    let dir = tempdir().unwrap();
    let o = buruli(&["lattice", "--nodes", "20,40", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("lattice_pde.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("num_nodes,h,jump_rate,dt,steps,l2_error,mass_drift,ratio"));
    let meta = fs::read_to_string(dir.path().join("lattice_heat.toml")).unwrap();
    assert!(meta.contains("boundary = \"reflecting\""));
}
