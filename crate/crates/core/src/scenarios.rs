//! Initial conditions, the five reference scenarios and run comparison.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretization::ModelKind;
use crate::grid::{diff, integrate, sup_norm, Field, Grid, GridError, Species, State};
use crate::params::{
    nondimensionalize_linear, nondimensionalize_nonlinear, DimensionalParams, NondimParams,
    ParamError,
};
use crate::stepper::{Integrator, RunFailure, RunOutput, StepError, StepperConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario id `{0}` (expected S1..S5 or custom)")]
    UnknownId(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("snapshot schedules differ: {0}")]
    Schedule(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    S5,
    #[serde(rename = "custom")]
    Custom,
}

impl ScenarioId {
    pub const PAPER: [ScenarioId; 5] = [
        ScenarioId::S1,
        ScenarioId::S2,
        ScenarioId::S3,
        ScenarioId::S4,
        ScenarioId::S5,
    ];

    /// Dimensional haptotactic sensitivities `(gamma1, gamma2)` in hours.
    pub fn sensitivities(self) -> Option<(f64, f64)> {
        match self {
            ScenarioId::S1 | ScenarioId::S4 | ScenarioId::S5 => Some((1e-5, 1e-5)),
            ScenarioId::S2 => Some((1e-3, 1e-5)),
            ScenarioId::S3 => Some((1e-5, 1e-3)),
            ScenarioId::Custom => None,
        }
    }

    pub fn has_chemotaxis(self) -> bool {
        self == ScenarioId::S4
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioId::S1 => "S1",
            ScenarioId::S2 => "S2",
            ScenarioId::S3 => "S3",
            ScenarioId::S4 => "S4",
            ScenarioId::S5 => "S5",
            ScenarioId::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for ScenarioId {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s1" | "1" => Ok(ScenarioId::S1),
            "s2" | "2" => Ok(ScenarioId::S2),
            "s3" | "3" => Ok(ScenarioId::S3),
            "s4" | "4" => Ok(ScenarioId::S4),
            "s5" | "5" => Ok(ScenarioId::S5),
            "custom" => Ok(ScenarioId::Custom),
            _ => Err(ScenarioError::UnknownId(s.to_string())),
        }
    }
}

/// How the initial normal tissue is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V0Mode {
    /// i.i.d. uniform on (0, 1) per cell.
    UniformRandom,
    /// i.i.d. uniform on (0, 1) per cell, times the factor.
    ScaledUniformRandom(f64),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConditionSpec {
    pub u0_amp: f64,
    pub m0_amp: f64,
    pub n0_amp: f64,
    pub gauss_center: [f64; 2],
    /// Denominator `w` in `exp(-|x - c|^2 / w)`.
    pub gauss_width: f64,
    pub v0_mode: V0Mode,
}

impl Default for InitialConditionSpec {
    fn default() -> Self {
        Self {
            u0_amp: 0.95,
            m0_amp: 0.001,
            n0_amp: 0.0001,
            gauss_center: [0.5, 0.5],
            gauss_width: 0.01,
            v0_mode: V0Mode::UniformRandom,
        }
    }
}

impl InitialConditionSpec {
    /// Low-tissue variant used by scenario 5.
    pub fn small_tissue() -> Self {
        Self {
            v0_mode: V0Mode::ScaledUniformRandom(1e-4),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (name, a) in [
            ("u0_amp", self.u0_amp),
            ("m0_amp", self.m0_amp),
            ("n0_amp", self.n0_amp),
        ] {
            if !(0.0..=1.0).contains(&a) {
                return Err(ScenarioError::Invalid(format!("{name} = {a} outside [0, 1]")));
            }
        }
        if !(self.gauss_width.is_finite() && self.gauss_width > 0.0) {
            return Err(ScenarioError::Invalid(format!(
                "gauss_width must be positive, got {}",
                self.gauss_width
            )));
        }
        match self.v0_mode {
            V0Mode::ScaledUniformRandom(c) | V0Mode::Constant(c) if !(0.0..=1.0).contains(&c) => {
                Err(ScenarioError::Invalid(format!("v0 level {c} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Samples the initial state at cell centers. The tissue noise comes from a
/// ChaCha8 stream seeded with `seed`, drawn in storage order.
pub fn build_initial_state(
    spec: &InitialConditionSpec,
    grid: &Grid,
    seed: u64,
) -> Result<State, ScenarioError> {
    spec.validate()?;
    let [cx, cy] = spec.gauss_center;
    let w = spec.gauss_width;
    let bump = |x: f64, y: f64| (-((x - cx).powi(2) + (y - cy).powi(2)) / w).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = match spec.v0_mode {
        V0Mode::UniformRandom => Field::from_fn(*grid, |_, _| Open01.sample(&mut rng)),
        V0Mode::ScaledUniformRandom(c) => {
            Field::from_fn(*grid, |_, _| c * Distribution::<f64>::sample(&Open01, &mut rng))
        }
        V0Mode::Constant(c) => Field::constant(*grid, c),
    };
    Ok(State {
        u: Field::from_fn(*grid, |x, y| spec.u0_amp * bump(x, y)),
        m: Field::from_fn(*grid, |x, y| spec.m0_amp * bump(x, y)),
        v,
        n: Field::from_fn(*grid, |x, y| spec.n0_amp * bump(x, y)),
        t: 0.0,
    })
}

/// Initial tissue of scenario 1 minus that of scenario 5 for a shared seed.
pub fn initial_tissue_difference(grid: &Grid, seed: u64) -> Result<Field, ScenarioError> {
    let full = build_initial_state(&InitialConditionSpec::default(), grid, seed)?;
    let small = build_initial_state(&InitialConditionSpec::small_tissue(), grid, seed)?;
    Ok(diff(&full.v, &small.v)?)
}

pub const DEFAULT_SEED: u64 = 20240917;

pub fn default_snapshots() -> Vec<f64> {
    (1..=50).map(|k| 5.0 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub model: ModelKind,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub ic: InitialConditionSpec,
    pub horizon: f64,
    pub snapshots: Vec<f64>,
    pub rng_seed: u64,
}

impl ScenarioSpec {
    /// Scenario `id` on `dims` after the scenario's own sensitivities have
    /// been substituted. `Custom` keeps `dims` as is.
    pub fn with_params(id: ScenarioId, dims: &DimensionalParams) -> Result<Self, ScenarioError> {
        Self::from_dimensional(id, &scenario_dimensional(id, dims))
    }

    /// Scenario `id` with sensitivities taken from `dims` unchanged.
    pub fn from_dimensional(id: ScenarioId, dims: &DimensionalParams) -> Result<Self, ScenarioError> {
        let np = nondimensionalize_linear(dims)?;
        Ok(Self {
            id,
            model: ModelKind::Linear,
            g1: np.g1,
            g2: np.g2,
            g3: np.g3,
            ic: if id == ScenarioId::S5 {
                InitialConditionSpec::small_tissue()
            } else {
                InitialConditionSpec::default()
            },
            horizon: 250.0,
            snapshots: default_snapshots(),
            rng_seed: DEFAULT_SEED,
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (name, g) in [("g1", self.g1), ("g2", self.g2), ("g3", self.g3)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(ScenarioError::Invalid(format!("{name} must be nonnegative, got {g}")));
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ScenarioError::Invalid(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        self.ic.validate()
    }

    /// Coefficients for this scenario: the model's reduction of `dims` with
    /// the scenario sensitivities substituted.
    pub fn nondim_params(&self, dims: &DimensionalParams) -> Result<NondimParams, ScenarioError> {
        let mut np = match self.model {
            ModelKind::Linear => nondimensionalize_linear(dims)?,
            ModelKind::Nonlinear => nondimensionalize_nonlinear(dims)?,
        };
        np.g1 = self.g1;
        np.g2 = self.g2;
        np.g3 = self.g3;
        Ok(np)
    }
}

/// `dims` with the scenario's dimensional sensitivities substituted and the
/// chemotactic term switched off outside scenario 4.
pub fn scenario_dimensional(id: ScenarioId, dims: &DimensionalParams) -> DimensionalParams {
    let mut d = dims.clone();
    if let Some((g1, g2)) = id.sensitivities() {
        d.gamma1 = g1;
        d.gamma2 = g2;
        if !id.has_chemotaxis() {
            d.gamma3 = 0.0;
        }
    }
    d
}

/// Scenario definition on the tabulated parameter set.
pub fn scenario_params(id: ScenarioId) -> Result<ScenarioSpec, ScenarioError> {
    if id == ScenarioId::Custom {
        return Err(ScenarioError::UnknownId("custom has no fixed definition".into()));
    }
    ScenarioSpec::with_params(id, &DimensionalParams::default())
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub spec: ScenarioSpec,
    pub params: NondimParams,
    pub initial: State,
    pub output: RunOutput,
}

impl ScenarioRun {
    pub fn snapshots(&self) -> &[State] {
        &self.output.snapshots
    }
}

#[derive(Debug, Error)]
pub enum ScenarioRunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Setup(#[from] StepError),
    #[error(transparent)]
    Run(#[from] RunFailure),
}

pub fn run_scenario(
    spec: &ScenarioSpec,
    dims: &DimensionalParams,
    grid: &Grid,
    cfg: &StepperConfig,
) -> Result<ScenarioRun, ScenarioRunError> {
    spec.validate()?;
    let np = spec.nondim_params(dims)?;
    let initial = build_initial_state(&spec.ic, grid, spec.rng_seed)?;
    let integ = Integrator::new(grid, spec.model, &np, cfg)?;
    let output = integ.run(&initial, spec.horizon, &spec.snapshots)?;
    Ok(ScenarioRun {
        spec: spec.clone(),
        params: np,
        initial,
        output,
    })
}

/// Field-wise `b - a` at one snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDiff {
    pub t: f64,
    /// Indexed like [`Species::ALL`].
    pub fields: [Field; 4],
    pub sup: [f64; 4],
    pub integral: [f64; 4],
}

impl StateDiff {
    pub fn field(&self, s: Species) -> &Field {
        &self.fields[species_index(s)]
    }

    pub fn sup_of(&self, s: Species) -> f64 {
        self.sup[species_index(s)]
    }

    pub fn integral_of(&self, s: Species) -> f64 {
        self.integral[species_index(s)]
    }
}

fn species_index(s: Species) -> usize {
    Species::ALL.iter().position(|&x| x == s).expect("listed")
}

/// Snapshot-by-snapshot differences `b - a`.
pub fn compare_runs(a: &[State], b: &[State]) -> Result<Vec<StateDiff>, ScenarioError> {
    if a.len() != b.len() {
        return Err(ScenarioError::Schedule(format!(
            "{} vs {} snapshots",
            a.len(),
            b.len()
        )));
    }
    a.iter()
        .zip(b)
        .map(|(sa, sb)| {
            if (sa.t - sb.t).abs() > 1e-9 * (1.0 + sa.t.abs()) {
                return Err(ScenarioError::Schedule(format!("t = {} vs t = {}", sa.t, sb.t)));
            }
            let d = |s: Species| diff(sb.field(s), sa.field(s));
            let fields = [
                d(Species::Bacteria)?,
                d(Species::Mycolactone)?,
                d(Species::Tissue)?,
                d(Species::Necrotic)?,
            ];
            let sup = [0, 1, 2, 3].map(|k| sup_norm(&fields[k]));
            let integral = [0, 1, 2, 3].map(|k| integrate(&fields[k]));
            Ok(StateDiff {
                t: sa.t,
                fields,
                sup,
                integral,
            })
        })
        .collect()
}
