//! Run artifacts: per-field CSV grids and graymap rasters, summary and
//! difference tables, convergence tables and the run manifest.
//!
//! A run directory looks like
//!
//! ```text
//! manifest.toml
//! summary.csv
//! snapshots/t00005.000_u.csv   t00005.000_u.pgm   t00005.000_u.scale
//! ```
//!
//! CSV grids start with the line `nx,ny,t`, then the three values, then one
//! line per grid row `j = 0 .. ny` holding the row's `nx` values. Numbers are
//! written in shortest round-trip form, so reading a grid back gives the
//! stored doubles exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::grid::{integrate, sup_norm, Field, Grid, Species, State};
use crate::lattice::{error_ratios, ErrorRow, StudySetup};
use crate::scenarios::StateDiff;
use crate::stepper::RunReport;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0} already holds a run; choose another output directory")]
    DirectoryInUse(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

/// Grid as CSV text.
pub fn field_to_csv(field: &Field, t: f64) -> String {
    let g = field.grid();
    let mut s = format!("nx,ny,t\n{},{},{}\n", g.nx, g.ny, t);
    for row in field.values().chunks_exact(g.nx) {
        let mut first = true;
        for v in row {
            if !first {
                s.push(',');
            }
            first = false;
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

/// Parses text written by [`field_to_csv`]; returns the field and its time.
pub fn field_from_csv(text: &str, path: &Path) -> Result<(Field, f64), OutputError> {
    let bad = |line: usize, message: String| OutputError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("nx,ny,t") {
        return Err(bad(1, "expected header `nx,ny,t`".into()));
    }
    let dims = lines.next().ok_or_else(|| bad(2, "missing grid line".into()))?;
    let parts: Vec<&str> = dims.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad(2, format!("expected 3 values, got {}", parts.len())));
    }
    let nx: usize = parts[0].parse().map_err(|e| bad(2, format!("nx: {e}")))?;
    let ny: usize = parts[1].parse().map_err(|e| bad(2, format!("ny: {e}")))?;
    let t: f64 = parts[2].parse().map_err(|e| bad(2, format!("t: {e}")))?;
    let grid = Grid::new(nx, ny).map_err(|e| bad(2, e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for (k, line) in lines.enumerate() {
        let lineno = k + 3;
        if k >= ny {
            if line.trim().is_empty() {
                continue;
            }
            return Err(bad(lineno, "more rows than ny".into()));
        }
        let before = values.len();
        for cell in line.split(',') {
            values.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(lineno, format!("{e}: `{cell}`")))?,
            );
        }
        if values.len() - before != nx {
            return Err(bad(lineno, format!("expected {nx} values, got {}", values.len() - before)));
        }
    }
    let field = Field::from_vec(grid, values).map_err(|e| bad(0, e.to_string()))?;
    Ok((field, t))
}

pub fn read_field_csv(path: &Path) -> Result<(Field, f64), OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    field_from_csv(&text, path)
}

/// Binary graymap (P5) with per-file min-max scaling. Row 0 of the image is
/// the top row `j = ny - 1`. Returns the `(min, max)` used.
pub fn field_to_pgm(field: &Field) -> (Vec<u8>, (f64, f64)) {
    let g = field.grid();
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    let mut bytes = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            let level = if span > 0.0 {
                ((field.at(i, j) - lo) / span * 255.0).round()
            } else {
                0.0
            };
            bytes.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    (bytes, (lo, hi))
}

/// Files written for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFiles {
    pub csv: Vec<PathBuf>,
    pub rasters: Vec<PathBuf>,
}

/// Writes `{prefix}_{u,m,v,n}.csv` and, when `rasters` is set, matching
/// `.pgm` images with `.scale` sidecars holding the raster's value range.
pub fn write_snapshot(state: &State, path_prefix: &Path, rasters: bool) -> Result<SnapshotFiles, OutputError> {
    let mut files = SnapshotFiles {
        csv: Vec::new(),
        rasters: Vec::new(),
    };
    let stem = path_prefix
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| OutputError::Invalid(format!("bad snapshot prefix {}", path_prefix.display())))?;
    let with_suffix = |name: &str, ext: &str| path_prefix.with_file_name(format!("{stem}_{name}.{ext}"));
    for s in Species::ALL {
        let field = state.field(s);
        let csv = with_suffix(s.short_name(), "csv");
        write_file(&csv, field_to_csv(field, state.t).as_bytes())?;
        files.csv.push(csv);
        if rasters {
            let (bytes, (lo, hi)) = field_to_pgm(field);
            let pgm = with_suffix(s.short_name(), "pgm");
            write_file(&pgm, &bytes)?;
            let scale = with_suffix(s.short_name(), "scale");
            write_file(&scale, format!("min = {lo}\nmax = {hi}\n").as_bytes())?;
            files.rasters.push(pgm);
        }
    }
    Ok(files)
}

/// Snapshot file prefix for time `t` inside `dir`.
pub fn snapshot_prefix(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("t{t:09.3}"))
}

/// Reads every snapshot written by [`write_snapshot`] in `dir`, ordered by
/// time.
pub fn read_snapshots(dir: &Path) -> Result<Vec<State>, OutputError> {
    let mut prefixes: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let stem = name.strip_suffix("_u.csv")?;
            Some(dir.join(stem))
        })
        .collect();
    prefixes.sort();
    let mut states = Vec::with_capacity(prefixes.len());
    for p in prefixes {
        let stem = p.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let read = |name: &str| read_field_csv(&p.with_file_name(format!("{stem}_{name}.csv")));
        let (u, t) = read("u")?;
        let (m, _) = read("m")?;
        let (v, _) = read("v")?;
        let (n, _) = read("n")?;
        states.push(State { u, m, v, n, t });
    }
    states.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(states)
}

/// Integrals and sup-norms of all four fields at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub t: f64,
    pub integral: [f64; 4],
    pub sup: [f64; 4],
}

impl SummaryRow {
    pub fn from_state(s: &State) -> Self {
        let mut integral = [0.0; 4];
        let mut sup = [0.0; 4];
        for (k, sp) in Species::ALL.iter().enumerate() {
            integral[k] = integrate(s.field(*sp));
            sup[k] = sup_norm(s.field(*sp));
        }
        Self { t: s.t, integral, sup }
    }
}

pub fn summary_rows(states: &[State]) -> Vec<SummaryRow> {
    states.iter().map(SummaryRow::from_state).collect()
}

fn check_increasing(ts: impl Iterator<Item = f64>) -> Result<(), OutputError> {
    let mut last = f64::NEG_INFINITY;
    for t in ts {
        if !(t > last) {
            return Err(OutputError::Invalid(format!(
                "time column must increase strictly: {t} after {last}"
            )));
        }
        last = t;
    }
    Ok(())
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String, OutputError> {
    check_increasing(rows.iter().map(|r| r.t))?;
    let mut s = String::from("t,int_u,int_m,int_v,int_n,sup_u,sup_m,sup_v,sup_n\n");
    for r in rows {
        let _ = write!(s, "{}", r.t);
        for x in r.integral.iter().chain(&r.sup) {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<(), OutputError> {
    write_file(path, summary_csv(rows)?.as_bytes())
}

/// One line per snapshot pair: sup-norms then integrals of `b - a`.
pub fn write_diff_report(diffs: &[StateDiff], path: &Path) -> Result<(), OutputError> {
    check_increasing(diffs.iter().map(|d| d.t))?;
    let mut s = String::from("t,sup_du,sup_dm,sup_dv,sup_dn,int_du,int_dm,int_dv,int_dn\n");
    for d in diffs {
        let _ = write!(s, "{}", d.t);
        for x in d.sup.iter().chain(&d.integral) {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    write_file(path, s.as_bytes())
}

/// Writes the difference fields of every snapshot pair under `dir`.
pub fn write_diff_fields(diffs: &[StateDiff], dir: &Path, rasters: bool) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for d in diffs {
        let [u, m, v, n] = d.fields.clone();
        let state = State { u, m, v, n, t: d.t };
        write_snapshot(&state, &snapshot_prefix(dir, d.t), rasters)?;
    }
    Ok(())
}

pub fn lattice_table_csv(rows: &[ErrorRow]) -> String {
    let ratios = error_ratios(rows);
    let mut s = String::from("num_nodes,h,jump_rate,dt,steps,l2_error,mass_drift,ratio\n");
    for (k, r) in rows.iter().enumerate() {
        let ratio = if k == 0 {
            String::new()
        } else {
            ratios[k - 1].to_string()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.num_nodes, r.h, r.jump_rate, r.dt, r.steps, r.l2_error, r.mass_drift, ratio
        );
    }
    s
}

/// Metadata of a lattice convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeManifest {
    pub version: String,
    /// Closure at the two ends of the lattice.
    pub boundary: String,
    pub reference: String,
    pub setup: StudySetup,
}

pub fn write_lattice_study(
    rows: &[ErrorRow],
    manifest: &LatticeManifest,
    dir: &Path,
    name: &str,
) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(format!("{name}.csv")), lattice_table_csv(rows).as_bytes())?;
    let text = toml::to_string(manifest).map_err(|e| OutputError::Invalid(e.to_string()))?;
    write_file(&dir.join(format!("{name}.toml")), text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Reproducibility record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// `valid` when every invariant held and the run reached its horizon,
    /// `invalid` otherwise.
    pub status: String,
    pub version: String,
    pub config_hash: String,
    pub scenario: String,
    pub model: String,
    pub rng_seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub horizon: f64,
    pub dt_requested: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub steps: usize,
    pub t_final: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub failure: Option<String>,
    pub snapshot_times: Vec<f64>,
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
    pub checks: Vec<CheckRecord>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, report: &RunReport, created_unix: u64) -> Self {
        Self {
            status: if report.is_valid() { "valid" } else { "invalid" }.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.source_hash.clone(),
            scenario: cfg.scenario.id.to_string(),
            model: format!("{:?}", cfg.scenario.model).to_lowercase(),
            rng_seed: cfg.scenario.rng_seed,
            nx: cfg.grid.nx,
            ny: cfg.grid.ny,
            horizon: cfg.scenario.horizon,
            dt_requested: cfg.stepper.dt,
            dt_min: if report.steps == 0 { 0.0 } else { report.dt_min },
            dt_max: report.dt_max,
            steps: report.steps,
            t_final: report.t_final,
            g1: cfg.scenario.g1,
            g2: cfg.scenario.g2,
            g3: cfg.scenario.g3,
            failure: report.failure.clone(),
            snapshot_times: cfg.scenario.snapshots.clone(),
            created_unix,
            checks: report
                .checks
                .iter()
                .map(|c| CheckRecord {
                    name: c.name.to_string(),
                    passed: c.passed,
                    detail: c.detail.clone(),
                })
                .collect(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.status == "valid"
    }
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), OutputError> {
    let text = toml::to_string(manifest).map_err(|e| OutputError::Invalid(e.to_string()))?;
    write_file(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Manifest, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| OutputError::Format {
        path: path.to_path_buf(),
        line: e
            .span()
            .map(|s| text[..s.start].matches('\n').count() + 1)
            .unwrap_or(0),
        message: e.message().to_string(),
    })
}

/// Creates `dir` for a new run, refusing one that already holds a manifest.
pub fn prepare_run_dir(dir: &Path) -> Result<(), OutputError> {
    if dir.join(MANIFEST_FILE).exists() {
        return Err(OutputError::DirectoryInUse(dir.to_path_buf()));
    }
    fs::create_dir_all(dir.join(SNAPSHOT_DIR)).map_err(io_err(dir))
}

/// Writes all artifacts of a finished (or aborted) run: the initial state
/// and each snapshot, the summary table and the manifest.
pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    initial: &State,
    snapshots: &[State],
    report: &RunReport,
    created_unix: u64,
) -> Result<Manifest, OutputError> {
    prepare_run_dir(dir)?;
    let snap_dir = dir.join(SNAPSHOT_DIR);
    let mut all = Vec::with_capacity(snapshots.len() + 1);
    all.push(initial.clone());
    all.extend(snapshots.iter().filter(|s| s.t > initial.t).cloned());
    if cfg.output.fields {
        for s in &all {
            write_snapshot(s, &snapshot_prefix(&snap_dir, s.t), cfg.output.rasters)?;
        }
    }
    write_summary(&summary_rows(&all), &dir.join(SUMMARY_FILE))?;
    let manifest = Manifest::new(cfg, report, created_unix);
    write_manifest(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn zero_field_files() {
        let g = Grid::square(5).unwrap();
        let dir = tempdir().unwrap();
        let files = write_snapshot(&State::zeros(g), &dir.path().join("z"), true).unwrap();
        assert_eq!(files.csv.len(), 4);
        let (f, t) = read_field_csv(&files.csv[0]).unwrap();
        assert_eq!(t, 0.0);
        assert!(f.values().iter().all(|&x| x == 0.0));
        let pgm = fs::read(&files.rasters[0]).unwrap();
        let header = b"P5\n5 5\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert!(pgm[header.len()..].iter().all(|&b| b == 0));
        assert_eq!(pgm.len(), header.len() + 25);
        let scale = fs::read_to_string(dir.path().join("z_u.scale")).unwrap();
        assert_eq!(scale, "min = 0\nmax = 0\n");
    }

    #[test]
    fn raster_orientation_and_scaling() {
        let g = Grid::new(4, 6).unwrap();
        let f = Field::from_fn(g, |_, y| y);
        let (bytes, (lo, hi)) = field_to_pgm(&f);
        assert!(lo < hi);
        let body = &bytes[bytes.len() - 24..];
        assert!(body[..4].iter().all(|&b| b == 255));
        assert!(body[20..].iter().all(|&b| b == 0));
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let p = Path::new("x.csv");
        assert!(field_from_csv("nx,ny\n", p).is_err());
        let err = field_from_csv("nx,ny,t\n4,4,0\n1,2,3,4\n1,2,3\n", p).unwrap_err();
        assert!(matches!(err, OutputError::Format { line: 4, .. }), "{err}");
        assert!(field_from_csv("nx,ny,t\n4,4,0\n1,2,3,x\n", p).is_err());
    }

    #[test]
    fn summary_needs_increasing_times() {
        let g = Grid::square(4).unwrap();
        let s = State::zeros(g);
        let rows = summary_rows(std::slice::from_ref(&s));
        let text = summary_csv(&rows).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(summary_csv(&summary_rows(&[s.clone(), s])).is_err());
    }

    #[test]
    fn refuses_reused_directory() {
        let dir = tempdir().unwrap();
        prepare_run_dir(dir.path()).unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "").unwrap();
        assert!(matches!(
            prepare_run_dir(dir.path()),
            Err(OutputError::DirectoryInUse(_))
        ));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip_is_exact(
                vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL, 20),
                t in 0.0f64..1e3,
            ) {
                let g = Grid::new(4, 5).unwrap();
                let f = Field::from_vec(g, vals).unwrap();
                let (back, tb) = field_from_csv(&field_to_csv(&f, t), Path::new("p")).unwrap();
                prop_assert_eq!(tb.to_bits(), t.to_bits());
                for (a, b) in f.values().iter().zip(back.values()) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
