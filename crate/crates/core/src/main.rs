use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use buruli::config::{load_config, parse_config, RunConfig};
use buruli::lattice::{convergence_study, error_ratios, HeatKernelReference, PdeReference, StudySetup};
use buruli::output::{
    read_manifest, read_snapshots, write_diff_fields, write_diff_report, write_lattice_study, write_run,
    LatticeManifest, Manifest, MANIFEST_FILE, SNAPSHOT_DIR,
};
use buruli::scenarios::{compare_runs, run_scenario, ScenarioId, ScenarioRunError};
use buruli::stepper::RunReport;
use buruli::{ModelKind, State};

#[derive(Debug, Parser)]
#[command(name = "buruli", version, about = "Buruli ulcer reaction-diffusion-taxis simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write snapshots, a summary and a manifest.
    Run(RunArgs),
    /// Difference of two runs, given as scenario ids (`s2`, `s1:nonlinear`)
    /// or as existing run directories.
    Compare(CompareArgs),
    /// Lattice-versus-continuum convergence study.
    Lattice(LatticeArgs),
    /// Run a scenario and report the invariant checks only.
    Validate(RunArgs),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario id (s1..s5, custom); overrides the config file.
    #[arg(long)]
    scenario: Option<ScenarioId>,
    #[arg(long)]
    seed: Option<u64>,
    /// `N` or `NXxNY`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Snapshot spacing (`5`) or explicit times (`1,2.5,10`).
    #[arg(long)]
    snapshots: Option<String>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CompareArgs {
    a: String,
    b: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct LatticeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated node counts.
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad grid size `{t}`: {e}"));
    match s.split_once(['x', 'X']) {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "linear" => Ok(ModelKind::Linear),
        "nonlinear" => Ok(ModelKind::Nonlinear),
        _ => Err(format!("unknown model `{s}` (linear, nonlinear)")),
    }
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

fn resolve(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => parse_config("")?,
    };
    if let Some(id) = common.scenario {
        cfg.set_scenario(id)?;
    }
    if let Some(seed) = common.seed {
        cfg.scenario.rng_seed = seed;
    }
    if let Some((nx, ny)) = common.grid {
        cfg.grid.nx = nx;
        cfg.grid.ny = ny;
    }
    if let Some(dt) = common.dt {
        cfg.stepper.dt = dt;
    }
    if let Some(m) = common.model {
        cfg.scenario.model = m;
    }
    if let Some(h) = common.horizon {
        cfg.scenario.horizon = h;
        cfg.scenario.snapshots.retain(|&t| t <= h);
    }
    if let Some(s) = &common.snapshots {
        if s.contains(',') {
            cfg.scenario.snapshots = s
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("bad snapshot list `{s}`: {e}"))?;
        } else {
            let every: f64 = s.trim().parse().map_err(|e| format!("bad snapshot spacing `{s}`: {e}"))?;
            cfg.snapshots_every(every)?;
        }
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct Executed {
    initial: State,
    snapshots: Vec<State>,
    report: RunReport,
}

fn execute(cfg: &RunConfig) -> CliResult<Executed> {
    let grid = cfg.grid()?;
    match run_scenario(&cfg.scenario, &cfg.params, &grid, &cfg.stepper) {
        Ok(run) => Ok(Executed {
            initial: run.initial,
            snapshots: run.output.snapshots,
            report: run.output.report,
        }),
        Err(ScenarioRunError::Run(failure)) => {
            let initial = buruli::build_initial_state(&cfg.scenario.ic, &grid, cfg.scenario.rng_seed)?;
            Ok(Executed {
                initial,
                snapshots: Vec::new(),
                report: failure.report,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn print_checks(report: &RunReport) {
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(f) = &report.failure {
        println!("FAIL aborted: {f}");
    }
}

fn run_to_dir(cfg: &RunConfig, dir: &Path) -> CliResult<(Manifest, Vec<State>)> {
    let started = Instant::now();
    let ex = execute(cfg)?;
    let manifest = write_run(dir, cfg, &ex.initial, &ex.snapshots, &ex.report, now_unix())?;
    println!(
        "{} {} ({}x{}): {} steps to t={} in {:.1}s -> {} [{}]",
        cfg.scenario.id,
        manifest.model,
        cfg.grid.nx,
        cfg.grid.ny,
        ex.report.steps,
        ex.report.t_final,
        started.elapsed().as_secs_f64(),
        dir.display(),
        manifest.status
    );
    print_checks(&ex.report);
    let mut all = vec![ex.initial];
    all.extend(ex.snapshots);
    Ok((manifest, all))
}

fn cmd_run(args: &RunArgs) -> CliResult<bool> {
    let cfg = resolve(&args.common)?;
    let (manifest, _) = run_to_dir(&cfg, &cfg.output.dir)?;
    Ok(manifest.is_valid())
}

fn cmd_validate(args: &RunArgs) -> CliResult<bool> {
    let cfg = resolve(&args.common)?;
    let ex = execute(&cfg)?;
    println!(
        "{} {:?} {}x{}: {} steps, dt in [{:e}, {:e}], t={}",
        cfg.scenario.id,
        cfg.scenario.model,
        cfg.grid.nx,
        cfg.grid.ny,
        ex.report.steps,
        ex.report.dt_min,
        ex.report.dt_max,
        ex.report.t_final
    );
    print_checks(&ex.report);
    Ok(ex.report.is_valid())
}

/// One side of a comparison.
enum Side {
    Dir(PathBuf),
    Scenario(ScenarioId, Option<ModelKind>),
}

fn parse_side(s: &str) -> CliResult<Side> {
    let p = PathBuf::from(s);
    if p.join(MANIFEST_FILE).is_file() {
        return Ok(Side::Dir(p));
    }
    let (id, model) = match s.split_once(':') {
        Some((id, m)) => (id, Some(parse_model(m)?)),
        None => (s, None),
    };
    match id.parse::<ScenarioId>() {
        Ok(id) => Ok(Side::Scenario(id, model)),
        Err(_) => Err(format!("`{s}` is neither a run directory nor a scenario id").into()),
    }
}

fn side_states(side: &Side, common: &Common, out: &Path, label: &str) -> CliResult<(String, Vec<State>)> {
    match side {
        Side::Dir(d) => {
            let m = read_manifest(&d.join(MANIFEST_FILE))?;
            if !m.is_valid() {
                eprintln!("warning: {} is marked invalid", d.display());
            }
            Ok((format!("{} {}", m.scenario, m.model), read_snapshots(&d.join(SNAPSHOT_DIR))?))
        }
        Side::Scenario(id, model) => {
            let mut cfg = resolve(common)?;
            cfg.set_scenario(*id)?;
            if let Some(m) = model {
                cfg.scenario.model = *m;
            }
            cfg.validate()?;
            let (manifest, states) = run_to_dir(&cfg, &out.join(label))?;
            Ok((format!("{} {}", manifest.scenario, manifest.model), states))
        }
    }
}

fn cmd_compare(args: &CompareArgs) -> CliResult<bool> {
    let a = parse_side(&args.a)?;
    let b = parse_side(&args.b)?;
    let out = match &args.common.out {
        Some(o) => o.clone(),
        None => resolve(&args.common)?.output.dir,
    };
    let (la, sa) = side_states(&a, &args.common, &out, "a")?;
    let (lb, sb) = side_states(&b, &args.common, &out, "b")?;
    let diffs = compare_runs(&sa, &sb)?;
    std::fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
    write_diff_report(&diffs, &out.join("diff.csv"))?;
    write_diff_fields(&diffs, &out.join("diff"), true)?;
    println!("difference ({lb}) - ({la}), sup norms:");
    println!("{:>10} {:>12} {:>12} {:>12} {:>12}", "t", "u", "m", "v", "n");
    for d in &diffs {
        println!(
            "{:>10} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            d.t, d.sup[0], d.sup[1], d.sup[2], d.sup[3]
        );
    }
    Ok(true)
}

fn cmd_lattice(args: &LatticeArgs) -> CliResult<bool> {
    let cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => parse_config("")?,
    };
    let study = cfg.lattice;
    let nodes = args.nodes.clone().unwrap_or(study.node_counts.clone());
    let out = args.out.clone().unwrap_or(cfg.output.dir);

    let started = Instant::now();
    let reference = PdeReference::solve(&study.setup, study.reference_cells, study.reference_dt)?;
    let rows = convergence_study(&reference, &study.setup, &nodes)?;
    let manifest = LatticeManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        boundary: "reflecting".into(),
        reference: format!(
            "finite-volume limit equation, {} cells, dt {}",
            study.reference_cells, study.reference_dt
        ),
        setup: study.setup.clone(),
    };
    write_lattice_study(&rows, &manifest, &out, "lattice_pde")?;

    let heat_setup = StudySetup::pure_diffusion(study.setup.diffusivity, study.setup.t_end, 0.4, 0.005);
    let kernel = HeatKernelReference::for_setup(&heat_setup)?;
    let heat_rows = convergence_study(&kernel, &heat_setup, &nodes)?;
    let heat_manifest = LatticeManifest {
        reference: "reflected heat kernel".into(),
        setup: heat_setup,
        ..manifest
    };
    write_lattice_study(&heat_rows, &heat_manifest, &out, "lattice_heat")?;

    let mut decreasing = true;
    for (name, rows) in [("continuum", &rows), ("heat kernel", &heat_rows)] {
        println!("lattice vs {name}:");
        println!("{:>6} {:>12} {:>12} {:>8} {:>12}", "nodes", "l2 error", "mass drift", "ratio", "steps");
        let ratios = error_ratios(rows);
        for (k, r) in rows.iter().enumerate() {
            let ratio = if k == 0 { "-".to_string() } else { format!("{:.3}", ratios[k - 1]) };
            println!(
                "{:>6} {:>12.4e} {:>12.2e} {:>8} {:>12}",
                r.num_nodes, r.l2_error, r.mass_drift, ratio, r.steps
            );
        }
        decreasing &= ratios.iter().all(|&q| q > 1.0);
    }
    println!("done in {:.1}s -> {}", started.elapsed().as_secs_f64(), out.display());
    Ok(decreasing)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Lattice(a) => cmd_lattice(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
