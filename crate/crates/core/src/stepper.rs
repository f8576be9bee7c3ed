//! Implicit-explicit time stepping for both models.
//!
//! Per step: bacteria and mycolactone diffusion are taken backward Euler;
//! taxis, growth, production, decay and the two tissue ODEs are taken
//! forward Euler from the state at the start of the step. In the nonlinear
//! model the bacteria diffusivity is frozen at the step start.

use thiserror::Error;

use crate::coefficients::unchecked as coef;
use crate::discretization::{
    diffusion_matrix, taxis_with_outflow, DiffusionOperator, DiscretizationError, Diffusivity,
    ModelKind,
};
use crate::grid::{Field, Grid, GridError, Species, State};
use crate::params::{NondimParams, ParamError};
use crate::solver::{solve_backward_euler, SolveError, SolverKind, SpectralSolver};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("{species:?} solve failed at t = {t}: {source}")]
    Solver {
        species: Species,
        t: f64,
        #[source]
        source: SolveError,
    },
    #[error("{species:?} dropped to {value:e} at cell ({i}, {j}), t = {t}; reduce dt")]
    Negativity {
        species: Species,
        i: usize,
        j: usize,
        value: f64,
        t: f64,
    },
    #[error("mycolactone bound breached at cell ({i}, {j}), t = {t}: {value:e} > {bound:e}")]
    MycolactoneBound {
        i: usize,
        j: usize,
        value: f64,
        bound: f64,
        t: f64,
    },
    #[error("invalid stepper configuration: {0}")]
    Config(String),
    #[error("invalid snapshot schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    /// Requested step; lowered to the stability limit when that is smaller.
    pub dt: f64,
    pub linear_tol: f64,
    /// Defaults to `10 * nx` when absent.
    pub max_linear_iters: Option<usize>,
    /// Fraction of the explicit stability limit used by [`stable_dt`].
    pub cfl_safety: f64,
    pub negativity_tol: f64,
    pub bound_tol: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            linear_tol: 1e-10,
            max_linear_iters: None,
            cfl_safety: 0.5,
            negativity_tol: 1e-8,
            bound_tol: 1e-6,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(StepError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(StepError::Config(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        for (name, v) in [
            ("linear_tol", self.linear_tol),
            ("negativity_tol", self.negativity_tol),
            ("bound_tol", self.bound_tol),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(StepError::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.max_linear_iters == Some(0) {
            return Err(StepError::Config("max_linear_iters must be positive".into()));
        }
        Ok(())
    }

    fn max_iters(&self, grid: &Grid) -> usize {
        self.max_linear_iters.unwrap_or(10 * grid.nx)
    }
}

/// Largest step the explicit part tolerates, scaled by `cfl_safety`: the
/// upwind limit `1 / max outflow rate` combined with the reaction limit
/// `1 / (lambda + beta1 max m + 1)`.
pub fn stable_dt(state: &State, model: ModelKind, np: &NondimParams, cfl_safety: f64) -> f64 {
    let (_, rate) = taxis_with_outflow(state, model, np);
    limit_from_rate(state, np, cfl_safety, rate)
}

fn limit_from_rate(state: &State, np: &NondimParams, cfl_safety: f64, outflow_rate: f64) -> f64 {
    let reaction = 1.0 / (np.lambda + np.beta1 * state.m.max().max(0.0) + 1.0);
    let transport = if outflow_rate > 0.0 {
        1.0 / outflow_rate
    } else {
        f64::INFINITY
    };
    cfl_safety * reaction.min(transport)
}

/// Diagnostics from one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub u_solver: SolverKind,
    pub u_iterations: usize,
    pub m_iterations: usize,
}

/// Reusable stepping context for one model, parameter set and grid.
#[derive(Debug, Clone)]
pub struct Integrator {
    grid: Grid,
    model: ModelKind,
    np: NondimParams,
    cfg: StepperConfig,
    spectral: SpectralSolver,
    mycolactone_op: DiffusionOperator,
    bacteria_op: Option<DiffusionOperator>,
}

impl Integrator {
    pub fn new(
        grid: &Grid,
        model: ModelKind,
        np: &NondimParams,
        cfg: &StepperConfig,
    ) -> Result<Self, StepError> {
        cfg.validate()?;
        np.validate()?;
        if model == ModelKind::Nonlinear && np.d_jump <= 0.0 {
            return Err(StepError::Config(
                "nonlinear model needs a positive position-jump diffusivity".into(),
            ));
        }
        let bacteria_op = match model {
            ModelKind::Linear => Some(diffusion_matrix(grid, Diffusivity::Constant(np.du))?),
            ModelKind::Nonlinear => None,
        };
        Ok(Self {
            grid: *grid,
            model,
            np: *np,
            cfg: cfg.clone(),
            spectral: SpectralSolver::new(grid),
            mycolactone_op: diffusion_matrix(grid, Diffusivity::Constant(1.0))?,
            bacteria_op,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn params(&self) -> &NondimParams {
        &self.np
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn stable_dt(&self, state: &State) -> f64 {
        stable_dt(state, self.model, &self.np, self.cfg.cfl_safety)
    }

    fn check_state(&self, state: &State) -> Result<(), StepError> {
        state.check_consistent()?;
        if state.grid() != &self.grid {
            return Err(GridError::Mismatch {
                left: self.grid,
                right: *state.grid(),
            }
            .into());
        }
        Ok(())
    }

    /// Advances by exactly `dt`, without consulting the stability limit.
    pub fn step_with(&self, state: &State, dt: f64) -> Result<(State, StepInfo), StepError> {
        self.check_state(state)?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(StepError::Config(format!("dt must be positive, got {dt}")));
        }
        let (taxis, _) = taxis_with_outflow(state, self.model, &self.np);
        self.advance(state, dt, &taxis)
    }

    /// Advances by `min(cfg.dt, stable_dt)`.
    pub fn step(&self, state: &State) -> Result<(State, StepInfo), StepError> {
        self.check_state(state)?;
        let (taxis, rate) = taxis_with_outflow(state, self.model, &self.np);
        let dt = self
            .cfg
            .dt
            .min(limit_from_rate(state, &self.np, self.cfg.cfl_safety, rate));
        self.advance(state, dt, &taxis)
    }

    fn advance(&self, state: &State, dt: f64, taxis: &[f64]) -> Result<(State, StepInfo), StepError> {
        let np = &self.np;
        let g = self.grid;
        let u = state.u.values();
        let m = state.m.values();
        let v = state.v.values();
        let n = state.n.values();
        let t_new = state.t + dt;
        let tol = self.cfg.linear_tol;
        let max_iters = self.cfg.max_iters(&g);

        let u_rhs: Vec<f64> = (0..g.len())
            .map(|k| u[k] + dt * (taxis[k] + coef::growth(u[k], v[k], n[k])))
            .collect();
        let lagged;
        let u_op = match &self.bacteria_op {
            Some(op) => op,
            None => {
                let d = Field::from_raw(
                    g,
                    (0..g.len())
                        .map(|k| coef::d_u_nl(u[k].max(0.0), v[k].max(0.0), np.d_jump))
                        .collect(),
                );
                lagged = diffusion_matrix(&g, Diffusivity::Cells(&d))?;
                &lagged
            }
        };
        let mut u_new = vec![0.0; g.len()];
        let (u_solver, u_stats) = solve_backward_euler(
            u_op,
            dt,
            &u_rhs,
            &mut u_new,
            Some(&self.spectral),
            tol,
            max_iters,
        )
        .map_err(|source| StepError::Solver {
            species: Species::Bacteria,
            t: t_new,
            source,
        })?;

        let m_rhs: Vec<f64> = (0..g.len())
            .map(|k| m[k] + dt * (np.delta * u[k] / (1.0 + u[k]) - np.lambda * m[k]))
            .collect();
        let mut m_new = vec![0.0; g.len()];
        let (_, m_stats) = solve_backward_euler(
            &self.mycolactone_op,
            dt,
            &m_rhs,
            &mut m_new,
            Some(&self.spectral),
            tol,
            max_iters,
        )
        .map_err(|source| StepError::Solver {
            species: Species::Mycolactone,
            t: t_new,
            source,
        })?;

        let mut v_new = vec![0.0; g.len()];
        let mut n_new = vec![0.0; g.len()];
        advance_tissue(v, n, m, dt, np, &mut v_new, &mut n_new);

        let next = State {
            u: Field::from_raw(g, u_new),
            m: Field::from_raw(g, m_new),
            v: Field::from_raw(g, v_new),
            n: Field::from_raw(g, n_new),
            t: t_new,
        };
        next.check_consistent()?;
        for s in Species::ALL {
            let (i, j, value) = next.field(s).argmin();
            if value < -self.cfg.negativity_tol {
                return Err(StepError::Negativity {
                    species: s,
                    i,
                    j,
                    value,
                    t: t_new,
                });
            }
        }
        Ok((
            next,
            StepInfo {
                dt,
                u_solver,
                u_iterations: u_stats.iterations,
                m_iterations: m_stats.iterations,
            },
        ))
    }

    /// Integrates to `horizon`, returning the states at `snapshot_times`
    /// (plus the final state when the horizon lies past the last snapshot).
    /// Steps are shortened so every snapshot is hit exactly.
    pub fn run(
        &self,
        initial: &State,
        horizon: f64,
        snapshot_times: &[f64],
    ) -> Result<RunOutput, RunFailure> {
        let mut report = RunReport::new(initial, &self.np, &self.cfg);
        match self.run_inner(initial, horizon, snapshot_times, &mut report) {
            Ok(snapshots) => {
                report.finish(None);
                Ok(RunOutput { snapshots, report })
            }
            Err(error) => {
                report.finish(Some(&error));
                Err(RunFailure { error, report })
            }
        }
    }

    fn run_inner(
        &self,
        initial: &State,
        horizon: f64,
        snapshot_times: &[f64],
        report: &mut RunReport,
    ) -> Result<Vec<State>, StepError> {
        self.check_state(initial)?;
        let t0 = initial.t;
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(StepError::Schedule(format!("horizon must be nonnegative, got {horizon}")));
        }
        let t_end = t0 + horizon;
        let mut prev = t0;
        for &s in snapshot_times {
            if !(s.is_finite() && s >= prev && s <= t_end) {
                return Err(StepError::Schedule(format!(
                    "snapshot times must ascend within [{t0}, {t_end}], got {s}"
                )));
            }
            prev = s;
        }
        if horizon == 0.0 {
            return Ok(vec![initial.clone()]);
        }
        let mut targets: Vec<f64> = snapshot_times.to_vec();
        let emit_final = targets.last().is_none_or(|&l| l < t_end);
        if emit_final {
            targets.push(t_end);
        }

        let m_cap = initial.m.max() + self.np.mycolactone_ceiling() + self.cfg.bound_tol;
        let mut out = Vec::with_capacity(targets.len());
        let mut state = initial.clone();
        for &target in &targets {
            while state.t < target {
                let (taxis, rate) = taxis_with_outflow(&state, self.model, &self.np);
                let limit = limit_from_rate(&state, &self.np, self.cfg.cfl_safety, rate);
                let mut dt = self.cfg.dt.min(limit);
                let remaining = target - state.t;
                let land = remaining <= dt * (1.0 + 1e-9);
                if land {
                    dt = remaining;
                }
                let (mut next, info) = self.advance(&state, dt, &taxis)?;
                if land {
                    next.t = target;
                }
                let step_cap = state.m.max().max(self.np.mycolactone_ceiling()) + self.cfg.bound_tol;
                let (i, j, m_max) = next.m.argmax();
                if m_max > step_cap.min(m_cap) {
                    return Err(StepError::MycolactoneBound {
                        i,
                        j,
                        value: m_max,
                        bound: step_cap.min(m_cap),
                        t: next.t,
                    });
                }
                report.record(&next, &info, m_cap);
                state = next;
            }
            out.push(state.clone());
        }
        Ok(out)
    }
}

/// Forward-Euler update of the two tissue equations.
pub fn advance_tissue(
    v: &[f64],
    n: &[f64],
    m: &[f64],
    dt: f64,
    np: &NondimParams,
    v_out: &mut [f64],
    n_out: &mut [f64],
) {
    for k in 0..v.len() {
        let necrotised = m[k] * v[k];
        v_out[k] = v[k] - dt * np.beta1 * necrotised;
        n_out[k] = n[k] + dt * (np.beta2 * necrotised - np.gamma * n[k]);
    }
}

/// One step of length `min(cfg.dt, stable_dt)`.
pub fn step(
    state: &State,
    model: ModelKind,
    np: &NondimParams,
    cfg: &StepperConfig,
) -> Result<State, StepError> {
    Integrator::new(state.grid(), model, np, cfg)?
        .step(state)
        .map(|(s, _)| s)
}

pub fn run(
    initial: &State,
    model: ModelKind,
    np: &NondimParams,
    cfg: &StepperConfig,
    horizon: f64,
    snapshot_times: &[f64],
) -> Result<RunOutput, RunFailure> {
    let integ = Integrator::new(initial.grid(), model, np, cfg).map_err(|error| RunFailure {
        report: RunReport::new(initial, np, cfg),
        error,
    })?;
    integ.run(initial, horizon, snapshot_times)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<State>,
    pub report: RunReport,
}

#[derive(Debug, Clone, Error)]
#[error("run aborted: {error}")]
pub struct RunFailure {
    #[source]
    pub error: StepError,
    pub report: RunReport,
}

/// Outcome of one invariant over a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Step statistics and invariant bookkeeping for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_final: f64,
    pub max_u_iterations: usize,
    pub max_m_iterations: usize,
    pub min_value: [f64; 4],
    pub max_m: f64,
    pub m_cap: f64,
    negativity_tol: f64,
    pub checks: Vec<InvariantCheck>,
    pub failure: Option<String>,
}

impl RunReport {
    fn new(initial: &State, np: &NondimParams, cfg: &StepperConfig) -> Self {
        let mut min_value = [0.0; 4];
        for (k, s) in Species::ALL.iter().enumerate() {
            min_value[k] = initial.field(*s).min();
        }
        Self {
            steps: 0,
            dt_min: f64::INFINITY,
            dt_max: 0.0,
            t_final: initial.t,
            max_u_iterations: 0,
            max_m_iterations: 0,
            min_value,
            max_m: initial.m.max(),
            m_cap: initial.m.max() + np.mycolactone_ceiling() + cfg.bound_tol,
            negativity_tol: cfg.negativity_tol,
            checks: Vec::new(),
            failure: None,
        }
    }

    fn record(&mut self, s: &State, info: &StepInfo, m_cap: f64) {
        self.steps += 1;
        self.dt_min = self.dt_min.min(info.dt);
        self.dt_max = self.dt_max.max(info.dt);
        self.t_final = s.t;
        self.max_u_iterations = self.max_u_iterations.max(info.u_iterations);
        self.max_m_iterations = self.max_m_iterations.max(info.m_iterations);
        for (k, sp) in Species::ALL.iter().enumerate() {
            self.min_value[k] = self.min_value[k].min(s.field(*sp).min());
        }
        self.max_m = self.max_m.max(s.m.max());
        self.m_cap = m_cap;
    }

    fn finish(&mut self, failure: Option<&StepError>) {
        let nonneg = self
            .min_value
            .iter()
            .all(|&v| v >= -self.negativity_tol);
        let neg_breach = matches!(failure, Some(StepError::Negativity { .. }));
        self.checks = vec![
            InvariantCheck {
                name: "nonnegativity",
                passed: nonneg && !neg_breach,
                detail: format!(
                    "min u={:e} m={:e} v={:e} n={:e} (tol {:e})",
                    self.min_value[0],
                    self.min_value[1],
                    self.min_value[2],
                    self.min_value[3],
                    self.negativity_tol
                ),
            },
            InvariantCheck {
                name: "mycolactone_bound",
                passed: self.max_m <= self.m_cap
                    && !matches!(failure, Some(StepError::MycolactoneBound { .. })),
                detail: format!("max m={:e} bound={:e}", self.max_m, self.m_cap),
            },
        ];
        self.failure = failure.map(|e| e.to_string());
    }

    pub fn is_valid(&self) -> bool {
        self.failure.is_none() && self.checks.iter().all(|c| c.passed)
    }
}
