use std::fs;
use std::path::Path;

use buruli::config::{parse_config, RunConfig};
use buruli::output::{
    read_field_csv, read_manifest, read_snapshots, summary_rows, write_run, write_snapshot, Manifest,
    MANIFEST_FILE, SNAPSHOT_DIR, SUMMARY_FILE,
};
use buruli::{run_scenario, Field, Grid, Integrator, ModelKind, State};
use tempfile::tempdir;

fn small_config(extra: &str) -> RunConfig {
    let text = format!(
        "[grid]\nnx = 20\nny = 20\n[scenario]\nhorizon = 4.0\nsnapshots = [1.0, 2.0, 3.0, 4.0]\n{extra}"
    );
    parse_config(&text).unwrap()
}

fn run_into(cfg: &RunConfig, dir: &Path, created: u64) -> Manifest {
    let grid = cfg.grid().unwrap();
    let run = run_scenario(&cfg.scenario, &cfg.params, &grid, &cfg.stepper).unwrap();
    write_run(dir, cfg, &run.initial, run.snapshots(), &run.output.report, created).unwrap()
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_runs_write_identical_files() {
    let cfg = small_config("");
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    let ma = run_into(&cfg, a.path(), 1);
    let mb = run_into(&cfg, b.path(), 2);
    assert_eq!(
        read_dir_bytes(&a.path().join(SNAPSHOT_DIR)),
        read_dir_bytes(&b.path().join(SNAPSHOT_DIR))
    );
    assert_eq!(
        fs::read(a.path().join(SUMMARY_FILE)).unwrap(),
        fs::read(b.path().join(SUMMARY_FILE)).unwrap()
    );
    assert_ne!(ma, mb);
    assert_eq!(Manifest { created_unix: 0, ..ma }, Manifest { created_unix: 0, ..mb });
    let text_a = fs::read_to_string(a.path().join(MANIFEST_FILE)).unwrap();
    let text_b = fs::read_to_string(b.path().join(MANIFEST_FILE)).unwrap();
    let strip = |t: &str| t.lines().filter(|l| !l.starts_with("created_unix")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&text_a), strip(&text_b));
}

#[test]
fn run_directory_round_trips() {
    let cfg = small_config("");
    let dir = tempdir().unwrap();
    let grid = cfg.grid().unwrap();
    let run = run_scenario(&cfg.scenario, &cfg.params, &grid, &cfg.stepper).unwrap();
    let manifest = write_run(dir.path(), &cfg, &run.initial, run.snapshots(), &run.output.report, 5).unwrap();
    assert!(manifest.is_valid());
    assert_eq!(manifest.rng_seed, cfg.scenario.rng_seed);
    assert_eq!((manifest.nx, manifest.ny), (20, 20));
    assert_eq!(manifest.steps, run.output.report.steps);
    assert_eq!(manifest.checks.len(), run.output.report.checks.len());
    assert_eq!(read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap(), manifest);

    let states = read_snapshots(&dir.path().join(SNAPSHOT_DIR)).unwrap();
    assert_eq!(states.len(), 5);
    assert_eq!(states[0], run.initial);
    assert_eq!(&states[1..], run.snapshots());

    // the cells nearest the bump centre sit half a cell off it in x and y
    let (u0, t0) = read_field_csv(&dir.path().join(SNAPSHOT_DIR).join("t00000.000_u.csv")).unwrap();
    assert_eq!(t0, 0.0);
    let r2 = 2.0 * 0.025f64.powi(2);
    assert!((u0.max() - 0.95 * (-r2 / 0.01).exp()).abs() < 1e-12);

    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    let rows: Vec<Vec<f64>> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    let expected = summary_rows(&states);
    for (r, e) in rows.iter().zip(&expected) {
        assert_eq!(r[0], e.t);
        assert_eq!(&r[1..5], &e.integral);
        assert_eq!(&r[5..9], &e.sup);
    }
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
        assert!(w[1][3] <= w[0][3], "integral of v grew");
    }

    // a second run may not reuse the directory
    let again = write_run(dir.path(), &cfg, &run.initial, run.snapshots(), &run.output.report, 6);
    assert!(again.is_err());
}

#[test]
fn seed_in_manifest_reproduces_tissue() {
    let cfg = small_config("seed = 99\n");
    let dir = tempdir().unwrap();
    let m = run_into(&cfg, dir.path(), 0);
    assert_eq!(m.rng_seed, 99);
    let states = read_snapshots(&dir.path().join(SNAPSHOT_DIR)).unwrap();
    let again = buruli::build_initial_state(&cfg.scenario.ic, &cfg.grid().unwrap(), m.rng_seed).unwrap();
    assert_eq!(states[0].v, again.v);
}

#[test]
fn failed_invariant_marks_manifest_invalid() {
    let cfg = small_config("");
    let g = cfg.grid().unwrap();
    let np = cfg.scenario.nondim_params(&cfg.params).unwrap();
    let mut initial = buruli::build_initial_state(&cfg.scenario.ic, &g, 1).unwrap();
    let mut v = initial.v.clone().into_values();
    v[17] = -0.01;
    initial.v = Field::from_vec(g, v).unwrap();
    let integ = Integrator::new(&g, ModelKind::Linear, &np, &cfg.stepper).unwrap();
    let failure = integ.run(&initial, 1.0, &[]).unwrap_err();
    let dir = tempdir().unwrap();
    let m = write_run(dir.path(), &cfg, &initial, &[], &failure.report, 0).unwrap();
    assert_eq!(m.status, "invalid");
    assert!(m.failure.is_some());
    let neg = m.checks.iter().find(|c| c.name == "nonnegativity").unwrap();
    assert!(!neg.passed);
    assert!(neg.detail.contains("v=-1e-2"), "{}", neg.detail);
    let back = read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(!back.is_valid());
}

#[test]
fn snapshot_files_per_field() {
    let g = Grid::new(6, 4).unwrap();
    let s = State {
        u: Field::from_fn(g, |x, y| x + 10.0 * y),
        m: Field::constant(g, 1e-300),
        v: Field::from_fn(g, |x, _| 1.0 / 3.0 + x),
        n: Field::zeros(g),
        t: 12.5,
    };
    let dir = tempdir().unwrap();
    let files = write_snapshot(&s, &dir.path().join("snap"), true).unwrap();
    assert_eq!(files.csv.len(), 4);
    assert_eq!(files.rasters.len(), 4);
    for (path, field) in files.csv.iter().zip([&s.u, &s.m, &s.v, &s.n]) {
        let (back, t) = read_field_csv(path).unwrap();
        assert_eq!(t, 12.5);
        assert_eq!(&back, field);
    }
    let scale = fs::read_to_string(dir.path().join("snap_v.scale")).unwrap();
    let lo: f64 = scale.lines().next().unwrap().trim_start_matches("min = ").parse().unwrap();
    assert_eq!(lo, s.v.min());
}
