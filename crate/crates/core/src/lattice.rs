//! One-dimensional position-jump lattice for the bacteria and its
//! continuum limit.
//!
//! Nodes sit at the cell centers `x_i = (i + 1/2) h` of `(0, 1)` and carry
//! the bacteria density `u_i`. A bacterium at node `i` jumps right at rate
//! `T+_i` and left at rate `T-_i`, where
//!
//! ```text
//! T±_i = lambda * (abar(u_i, v_i) + kappa(u_i, n_i) * (tau(n_{i±1}) - tau(n_i)))
//! ```
//!
//! in a frozen environment `v`, `n`. Jumps that would leave the domain are
//! suppressed, so the outermost nodes reflect. With `2 lambda h^2 = D` held
//! fixed the lattice approaches
//!
//! ```text
//! u_t = ((D/2) (abar(u, v) u)_x - D kappa(u, n) u tau'(n) n_x)_x
//! ```
//!
//! with zero flux at both ends. [`convergence_study`] measures that approach
//! against a fine-grid solution of the limit equation ([`PdeReference`]) or,
//! for pure diffusion, the reflected heat kernel ([`HeatKernelReference`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{unchecked as coef, ReceptorKinetics};
use crate::discretization::{
    advect_all_taxis, diffusion_matrix, max_outflow_rate, DiscretizationError, Diffusivity,
    ModelKind,
};
use crate::grid::{Field, Grid, GridError, State};
use crate::params::NondimParams;
use crate::solver::{solve_backward_euler, SolveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("lattice needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("invalid lattice setting: {0}")]
    Invalid(String),
    #[error("node {node} is on the boundary; its outward rate is not defined")]
    BoundaryNode { node: usize },
    #[error("expected {expected} node values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("negative jump rate at node {node}: T+ = {t_plus}, T- = {t_minus}")]
    NegativeRate {
        node: usize,
        t_plus: f64,
        t_minus: f64,
    },
    #[error("unstable step at node {node}: dt * (T+ + T-) = {value} >= 1")]
    Unstable { node: usize, value: f64 },
    #[error("profile `{0}` is not smooth enough for a convergence study")]
    NonSmooth(&'static str),
    #[error("reference has {reference} cells, not a multiple of {nodes}")]
    Incommensurate { reference: usize, nodes: usize },
    #[error("reference step too large: upwind outflow {rate} per unit time with dt = {dt}")]
    ReferenceCfl { rate: f64, dt: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A profile on `[0, 1]`, used for frozen environments and initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `mean + amplitude * cos(pi * wavenumber * x)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        wavenumber: u32,
    },
    /// `amplitude * exp(-(x - center)^2 / width)`.
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Normal density of the given mass, mean and variance folded back into
    /// `[0, 1]` by reflection at both ends.
    ReflectedGaussian {
        mass: f64,
        center: f64,
        variance: f64,
    },
    Step {
        left: f64,
        right: f64,
        at: f64,
    },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Cosine {
                mean,
                amplitude,
                wavenumber,
            } => mean + amplitude * (std::f64::consts::PI * wavenumber as f64 * x).cos(),
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => amplitude * (-(x - center).powi(2) / width).exp(),
            Profile::ReflectedGaussian {
                mass,
                center,
                variance,
            } => reflected_gaussian(x, mass, center, variance),
            Profile::Step { left, right, at } => {
                if x < at {
                    left
                } else {
                    right
                }
            }
        }
    }

    /// Values at the centers of `cells` equal cells on `(0, 1)`.
    pub fn sample(&self, cells: usize) -> Vec<f64> {
        let h = 1.0 / cells as f64;
        (0..cells).map(|i| self.eval((i as f64 + 0.5) * h)).collect()
    }

    /// Rejects profiles with jumps. For a smooth profile the largest
    /// neighbor difference halves when the sampling is refined; across a
    /// jump it does not.
    fn check_smooth(&self, name: &'static str) -> Result<(), LatticeError> {
        let largest_step = |cells: usize| {
            let s = self.sample(cells);
            s.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
        };
        let coarse = largest_step(256);
        let fine = largest_step(512);
        if !(coarse.is_finite() && fine.is_finite()) {
            return Err(LatticeError::NonSmooth(name));
        }
        if coarse > 1e-12 && fine > 0.75 * coarse {
            return Err(LatticeError::NonSmooth(name));
        }
        Ok(())
    }
}

fn reflected_gaussian(x: f64, mass: f64, center: f64, variance: f64) -> f64 {
    let norm = mass / (2.0 * std::f64::consts::PI * variance).sqrt();
    let g = |d: f64| (-d * d / (2.0 * variance)).exp();
    // images of the source under reflection at 0 and 1 sit at 2k ± center
    let reach = (8.0 * variance.sqrt()).ceil() as i64 + 1;
    (-reach..=reach)
        .map(|k| {
            let shift = 2.0 * k as f64;
            g(x - (shift + center)) + g(x - (shift - center))
        })
        .sum::<f64>()
        * norm
}

/// One lattice resolution in a frozen environment.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub num_nodes: usize,
    pub h: f64,
    /// Jump rate `lambda` of the rates `T±`.
    pub jump_rate: f64,
    /// Macroscopic diffusivity `D = 2 lambda h^2`.
    pub diffusivity: f64,
    pub dt: f64,
    pub rk: ReceptorKinetics,
    pub frozen_v: Vec<f64>,
    pub frozen_n: Vec<f64>,
}

impl LatticeConfig {
    /// Lattice with `num_nodes` nodes whose jump rate reproduces
    /// `diffusivity`. The step is `stability_fraction` times the largest
    /// step allowed by the worst-case rates over all densities.
    pub fn new(
        num_nodes: usize,
        diffusivity: f64,
        rk: ReceptorKinetics,
        tissue: &Profile,
        necrotic: &Profile,
        stability_fraction: f64,
    ) -> Result<Self, LatticeError> {
        if num_nodes < 3 {
            return Err(LatticeError::TooFewNodes(num_nodes));
        }
        if !(diffusivity.is_finite() && diffusivity > 0.0) {
            return Err(LatticeError::Invalid(format!(
                "diffusivity must be positive, got {diffusivity}"
            )));
        }
        if !(stability_fraction > 0.0 && stability_fraction < 1.0) {
            return Err(LatticeError::Invalid(format!(
                "stability fraction must lie in (0, 1), got {stability_fraction}"
            )));
        }
        let h = 1.0 / num_nodes as f64;
        let jump_rate = diffusivity / (2.0 * h * h);
        let frozen_v = tissue.sample(num_nodes);
        let frozen_n = necrotic.sample(num_nodes);
        for (name, f) in [("tissue", &frozen_v), ("necrotic", &frozen_n)] {
            if f.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(LatticeError::Invalid(format!("{name} profile must be nonnegative")));
            }
        }
        let tau: Vec<f64> = frozen_n.iter().map(|&n| coef::tau(n, &rk)).collect();
        let max_dtau = tau.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        // abar and kappa never exceed one
        let worst = 2.0 * jump_rate * (1.0 + max_dtau);
        let cfg = Self {
            num_nodes,
            h,
            jump_rate,
            diffusivity,
            dt: stability_fraction / worst,
            rk,
            frozen_v,
            frozen_n,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let d = 2.0 * self.jump_rate * self.h * self.h;
        if (d - self.diffusivity).abs() > 1e-12 * self.diffusivity.max(1.0) {
            return Err(LatticeError::Invalid(format!(
                "2 lambda h^2 = {d} differs from D = {}",
                self.diffusivity
            )));
        }
        for (expected, got) in [
            (self.num_nodes, self.frozen_v.len()),
            (self.num_nodes, self.frozen_n.len()),
        ] {
            if expected != got {
                return Err(LatticeError::Length { expected, got });
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(LatticeError::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    pub fn node_positions(&self) -> Vec<f64> {
        (0..self.num_nodes)
            .map(|i| (i as f64 + 0.5) * self.h)
            .collect()
    }

    fn tau(&self, i: usize) -> f64 {
        coef::tau(self.frozen_n[i], &self.rk)
    }

    fn rate(&self, i: usize, u_i: f64, toward: usize) -> f64 {
        let base = coef::a_bar(u_i, self.frozen_v[i]);
        let bias = coef::kappa(u_i, self.frozen_n[i]) * (self.tau(toward) - self.tau(i));
        self.jump_rate * (base + bias)
    }

    /// Rates with the reflecting closure: no jumps out of `[0, N)`.
    fn closed_rates(&self, i: usize, u_i: f64) -> (f64, f64) {
        let last = self.num_nodes - 1;
        let plus = if i < last { self.rate(i, u_i, i + 1) } else { 0.0 };
        let minus = if i > 0 { self.rate(i, u_i, i - 1) } else { 0.0 };
        (plus, minus)
    }
}

/// `(T+, T-)` at an interior node for density `u_i`.
pub fn jump_probabilities(cfg: &LatticeConfig, i: usize, u_i: f64) -> Result<(f64, f64), LatticeError> {
    if i == 0 || i + 1 >= cfg.num_nodes {
        return Err(LatticeError::BoundaryNode { node: i });
    }
    Ok((cfg.rate(i, u_i, i + 1), cfg.rate(i, u_i, i - 1)))
}

/// One step of the master equation
/// `u_i <- u_i + dt (T+_{i-1} u_{i-1} + T-_{i+1} u_{i+1} - (T+_i + T-_i) u_i)`.
///
/// The update is applied edge by edge, so `sum(u)` is unchanged up to
/// round-off.
pub fn master_step(u: &[f64], cfg: &LatticeConfig) -> Result<Vec<f64>, LatticeError> {
    if u.len() != cfg.num_nodes {
        return Err(LatticeError::Length {
            expected: cfg.num_nodes,
            got: u.len(),
        });
    }
    let rates: Vec<(f64, f64)> = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| cfg.closed_rates(i, ui))
        .collect();
    for (i, &(plus, minus)) in rates.iter().enumerate() {
        if plus < 0.0 || minus < 0.0 {
            return Err(LatticeError::NegativeRate {
                node: i,
                t_plus: plus,
                t_minus: minus,
            });
        }
        let leave = cfg.dt * (plus + minus);
        if leave >= 1.0 {
            return Err(LatticeError::Unstable { node: i, value: leave });
        }
    }
    let mut next = u.to_vec();
    for i in 0..cfg.num_nodes - 1 {
        let flow = cfg.dt * (rates[i].0 * u[i] - rates[i + 1].1 * u[i + 1]);
        next[i] -= flow;
        next[i + 1] += flow;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeRun {
    pub u: Vec<f64>,
    pub steps: usize,
    /// Step actually taken, `t_end / steps`.
    pub dt: f64,
}

/// Iterates the master equation from `u0` to `t_end`, shortening the
/// configured step so that `t_end` is hit exactly.
pub fn run_lattice(u0: &[f64], cfg: &LatticeConfig, t_end: f64) -> Result<LatticeRun, LatticeError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(LatticeError::Invalid(format!("end time must be nonnegative, got {t_end}")));
    }
    let steps = (t_end / cfg.dt).ceil() as usize;
    if steps == 0 {
        return Ok(LatticeRun {
            u: u0.to_vec(),
            steps: 0,
            dt: 0.0,
        });
    }
    let mut local = cfg.clone();
    local.dt = t_end / steps as f64;
    let mut u = u0.to_vec();
    for _ in 0..steps {
        u = master_step(&u, &local)?;
    }
    Ok(LatticeRun {
        u,
        steps,
        dt: local.dt,
    })
}

/// Everything a convergence study holds fixed while `h` varies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySetup {
    pub diffusivity: f64,
    pub t_end: f64,
    #[serde(default)]
    pub rk: ReceptorKinetics,
    pub initial: Profile,
    pub tissue: Profile,
    pub necrotic: Profile,
    #[serde(default = "default_stability_fraction")]
    pub stability_fraction: f64,
}

fn default_stability_fraction() -> f64 {
    0.45
}

impl StudySetup {
    /// Smooth nonuniform environment with a bump of bacteria in the middle.
    pub fn smooth_default() -> Self {
        Self {
            diffusivity: 0.02,
            t_end: 0.5,
            rk: ReceptorKinetics::default(),
            initial: Profile::Gaussian {
                amplitude: 0.8,
                center: 0.45,
                width: 0.02,
            },
            tissue: Profile::Cosine {
                mean: 0.5,
                amplitude: 0.3,
                wavenumber: 1,
            },
            necrotic: Profile::Cosine {
                mean: 0.5,
                amplitude: 0.4,
                wavenumber: 1,
            },
            stability_fraction: default_stability_fraction(),
        }
    }

    /// Pure diffusion: no tissue crowding and a flat necrotic field.
    pub fn pure_diffusion(diffusivity: f64, t_end: f64, center: f64, variance: f64) -> Self {
        Self {
            diffusivity,
            t_end,
            rk: ReceptorKinetics::default(),
            initial: Profile::ReflectedGaussian {
                mass: 1.0,
                center,
                variance,
            },
            tissue: Profile::Constant { value: 0.0 },
            necrotic: Profile::Constant { value: 0.5 },
            stability_fraction: default_stability_fraction(),
        }
    }

    fn check(&self) -> Result<(), LatticeError> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(LatticeError::Invalid(format!(
                "end time must be positive, got {}",
                self.t_end
            )));
        }
        self.initial.check_smooth("initial")?;
        self.tissue.check_smooth("tissue")?;
        self.necrotic.check_smooth("necrotic")
    }
}

/// Limit density at `t_end`, restricted to a lattice with `num_nodes` nodes.
pub trait TargetSolution {
    fn sample(&self, num_nodes: usize) -> Result<Vec<f64>, LatticeError>;
}

/// Fine-grid finite-volume solution of the limit equation, reusing the 2D
/// discretization on a strip that is uniform across its short axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeReference {
    pub num_cells: usize,
    pub values: Vec<f64>,
    pub steps: usize,
}

const STRIP_WIDTH: usize = 4;

impl PdeReference {
    /// Integrates with explicit upwind taxis and backward-Euler nonlinear
    /// diffusion at step `dt`, shortened to land on `t_end`.
    pub fn solve(setup: &StudySetup, num_cells: usize, dt: f64) -> Result<Self, LatticeError> {
        setup.check()?;
        if setup.rk.k_ratio != 1.0 {
            return Err(LatticeError::Invalid(
                "the reference equation assumes a unit binding ratio".into(),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(LatticeError::Invalid(format!("dt must be positive, got {dt}")));
        }
        let grid = Grid::new(num_cells, STRIP_WIDTH)?;
        let strip = |p: &Profile| Field::from_fn(grid, |x, _| p.eval(x));
        let np = NondimParams {
            du: 0.0,
            g1: 0.0,
            g2: 0.0,
            g3: 0.0,
            delta: 0.0,
            lambda: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            gamma: 0.0,
            d_jump: 0.5 * setup.diffusivity,
            chi_n: setup.diffusivity * setup.rk.b * setup.rk.r_total,
        };
        let mut state = State {
            u: strip(&setup.initial),
            m: Field::zeros(grid),
            v: strip(&setup.tissue),
            n: strip(&setup.necrotic),
            t: 0.0,
        };
        let steps = (setup.t_end / dt).ceil() as usize;
        let dt = setup.t_end / steps as f64;
        let max_iters = 20 * grid.len();
        for _ in 0..steps {
            let rate = max_outflow_rate(&state, ModelKind::Nonlinear, &np);
            if rate * dt >= 0.9 {
                return Err(LatticeError::ReferenceCfl { rate, dt });
            }
            let taxis = advect_all_taxis(&state, ModelKind::Nonlinear, &np);
            let u = state.u.values();
            let v = state.v.values();
            let rhs: Vec<f64> = u
                .iter()
                .zip(taxis.values())
                .map(|(ui, ti)| ui + dt * ti)
                .collect();
            let d = Field::from_vec(
                grid,
                u.iter()
                    .zip(v)
                    .map(|(&uk, &vk)| coef::d_u_nl(uk.max(0.0), vk, np.d_jump))
                    .collect(),
            )?;
            let op = diffusion_matrix(&grid, Diffusivity::Cells(&d))?;
            let mut next = vec![0.0; grid.len()];
            solve_backward_euler(&op, dt, &rhs, &mut next, None, 1e-12, max_iters)?;
            state.u = Field::from_vec(grid, next)?;
            state.t += dt;
        }
        let values = state.u.values()[..num_cells].to_vec();
        Ok(Self {
            num_cells,
            values,
            steps,
        })
    }
}

impl TargetSolution for PdeReference {
    /// Averages of the fine cells covering each lattice node's cell.
    fn sample(&self, num_nodes: usize) -> Result<Vec<f64>, LatticeError> {
        if num_nodes == 0 || !self.num_cells.is_multiple_of(num_nodes) {
            return Err(LatticeError::Incommensurate {
                reference: self.num_cells,
                nodes: num_nodes,
            });
        }
        let r = self.num_cells / num_nodes;
        Ok(self
            .values
            .chunks_exact(r)
            .map(|c| c.iter().sum::<f64>() / r as f64)
            .collect())
    }
}

/// Exact solution of `u_t = (D/2) u_xx` with reflecting ends, started from
/// a reflected normal density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernelReference {
    pub mass: f64,
    pub center: f64,
    pub initial_variance: f64,
    pub diffusivity: f64,
    pub t_end: f64,
}

impl HeatKernelReference {
    pub fn for_setup(setup: &StudySetup) -> Result<Self, LatticeError> {
        match setup.initial {
            Profile::ReflectedGaussian {
                mass,
                center,
                variance,
            } => Ok(Self {
                mass,
                center,
                initial_variance: variance,
                diffusivity: setup.diffusivity,
                t_end: setup.t_end,
            }),
            _ => Err(LatticeError::Invalid(
                "heat kernel reference needs a reflected Gaussian start".into(),
            )),
        }
    }

    pub fn variance_at_end(&self) -> f64 {
        self.initial_variance + self.diffusivity * self.t_end
    }
}

impl TargetSolution for HeatKernelReference {
    /// Point values at the nodes.
    fn sample(&self, num_nodes: usize) -> Result<Vec<f64>, LatticeError> {
        let var = self.variance_at_end();
        Ok(Profile::ReflectedGaussian {
            mass: self.mass,
            center: self.center,
            variance: var,
        }
        .sample(num_nodes))
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub num_nodes: usize,
    pub h: f64,
    pub jump_rate: f64,
    pub dt: f64,
    pub steps: usize,
    /// `sqrt(h * sum (u_i - target_i)^2)`.
    pub l2_error: f64,
    /// `h * sum(u_end) - h * sum(u_0)`.
    pub mass_drift: f64,
}

/// Runs the lattice at every resolution in `node_counts` and measures the
/// discrete L2 distance to `target` at the end time.
pub fn convergence_study(
    target: &dyn TargetSolution,
    setup: &StudySetup,
    node_counts: &[usize],
) -> Result<Vec<ErrorRow>, LatticeError> {
    setup.check()?;
    node_counts
        .iter()
        .map(|&num_nodes| {
            let cfg = LatticeConfig::new(
                num_nodes,
                setup.diffusivity,
                setup.rk,
                &setup.tissue,
                &setup.necrotic,
                setup.stability_fraction,
            )?;
            let u0 = setup.initial.sample(num_nodes);
            let run = run_lattice(&u0, &cfg, setup.t_end)?;
            let want = target.sample(num_nodes)?;
            let h = cfg.h;
            let l2 = (h * run
                .u
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>())
            .sqrt();
            let mass = |u: &[f64]| h * u.iter().sum::<f64>();
            Ok(ErrorRow {
                num_nodes,
                h,
                jump_rate: cfg.jump_rate,
                dt: run.dt,
                steps: run.steps,
                l2_error: l2,
                mass_drift: mass(&run.u) - mass(&u0),
            })
        })
        .collect()
}

/// Successive error ratios `e_k / e_{k+1}`.
pub fn error_ratios(rows: &[ErrorRow]) -> Vec<f64> {
    rows.windows(2)
        .map(|w| w[0].l2_error / w[1].l2_error)
        .collect()
}
