//! Run configuration read from a TOML file.
//!
//! Sections: `[parameters]` (physical parameter overrides), `[grid]`,
//! `[stepper]`, `[scenario]` (with an optional `[scenario.initial]`),
//! `[output]` and `[lattice]`. Every section and key is optional; unknown
//! keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::discretization::ModelKind;
use crate::grid::{Grid, GridError};
use crate::lattice::StudySetup;
use crate::params::{DimensionalParams, ParamError};
use crate::scenarios::{
    scenario_dimensional, InitialConditionSpec, ScenarioError, ScenarioId, ScenarioSpec,
};
use crate::stepper::StepperConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", match line { Some(l) => format!("line {l}"), None => "config".to_string() })]
    Parse { line: Option<usize>, message: String },
    #[error("invalid parameter: {0}")]
    Param(#[from] ParamError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid stepper setting: {0}")]
    Stepper(String),
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 100, ny: 100 }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, GridError> {
        Grid::new(self.nx, self.ny)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write per-field CSV grids at each snapshot.
    pub fields: bool,
    /// Write per-field graymap rasters next to the CSV grids.
    pub rasters: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            fields: true,
            rasters: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeStudyConfig {
    #[serde(flatten)]
    pub setup: StudySetup,
    pub node_counts: Vec<usize>,
    pub reference_cells: usize,
    pub reference_dt: f64,
}

impl Default for LatticeStudyConfig {
    fn default() -> Self {
        Self {
            setup: StudySetup::smooth_default(),
            node_counts: vec![20, 40, 80],
            reference_cells: 1280,
            reference_dt: 1e-3,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: Option<ScenarioId>,
    model: Option<ModelKind>,
    seed: Option<u64>,
    horizon: Option<f64>,
    snapshots: Option<Vec<f64>>,
    initial: Option<InitialConditionSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    parameters: toml::Table,
    #[serde(default)]
    grid: GridConfig,
    #[serde(default)]
    stepper: StepperConfig,
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    output: OutputConfig,
    lattice: Option<LatticeStudyConfig>,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Parameter keys set explicitly in the file; they win over the
    /// scenario's own sensitivities.
    pub overrides: toml::Table,
    pub params: DimensionalParams,
    pub grid: GridConfig,
    pub stepper: StepperConfig,
    pub scenario: ScenarioSpec,
    pub output: OutputConfig,
    pub lattice: LatticeStudyConfig,
    /// Hex SHA-256 of the configuration text (empty text when defaulted).
    pub source_hash: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("empty configuration is valid")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut in_section = false;
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            in_section = t.trim_matches(|c| c == '[' || c == ']').trim() == section;
            continue;
        }
        if in_section {
            if let Some((lhs, _)) = t.split_once('=') {
                if lhs.trim().trim_matches('"') == key {
                    return Some(k + 1);
                }
            }
        }
    }
    None
}

fn hash_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `base` with every key of `overrides` replaced.
fn apply_overrides(base: &DimensionalParams, overrides: &toml::Table) -> Result<DimensionalParams, String> {
    let mut table = toml::Table::try_from(base).map_err(|e| e.to_string())?;
    for (k, v) in overrides {
        table.insert(k.clone(), v.clone());
    }
    DimensionalParams::deserialize(table).map_err(|e| e.message().to_string())
}

/// Parses configuration text. Parameter overrides are laid over the
/// tabulated defaults after the selected scenario's sensitivities.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let id = raw.scenario.id.unwrap_or(ScenarioId::S1);
    let mut cfg = RunConfig {
        overrides: raw.parameters,
        params: DimensionalParams::default(),
        grid: raw.grid,
        stepper: raw.stepper,
        scenario: ScenarioSpec::with_params(ScenarioId::S1, &DimensionalParams::default())?,
        output: raw.output,
        lattice: raw.lattice.unwrap_or_default(),
        source_hash: hash_hex(text),
    };
    cfg.set_scenario(id).map_err(|e| match e {
        ConfigError::Parse { line: None, message } => {
            let line = cfg
                .overrides
                .keys()
                .find(|k| message.contains(k.as_str()))
                .and_then(|k| key_line(text, "parameters", k));
            ConfigError::Parse { line, message }
        }
        other => other,
    })?;
    let s = raw.scenario;
    if let Some(m) = s.model {
        cfg.scenario.model = m;
    }
    if let Some(seed) = s.seed {
        cfg.scenario.rng_seed = seed;
    }
    if let Some(h) = s.horizon {
        cfg.scenario.horizon = h;
    }
    if let Some(snaps) = s.snapshots {
        cfg.scenario.snapshots = snaps;
    }
    if let Some(ic) = s.initial {
        cfg.scenario.ic = ic;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

impl RunConfig {
    /// Switches to scenario `id`, keeping explicit parameter overrides and
    /// every non-parameter scenario setting except the initial data.
    pub fn set_scenario(&mut self, id: ScenarioId) -> Result<(), ConfigError> {
        let base = scenario_dimensional(id, &DimensionalParams::default());
        let params = apply_overrides(&base, &self.overrides)
            .map_err(|message| ConfigError::Parse { line: None, message })?;
        params.validate()?;
        let mut spec = ScenarioSpec::from_dimensional(id, &params)?;
        spec.model = self.scenario.model;
        spec.rng_seed = self.scenario.rng_seed;
        spec.horizon = self.scenario.horizon;
        spec.snapshots = self.scenario.snapshots.clone();
        self.params = params;
        self.scenario = spec;
        Ok(())
    }

    /// Replaces the snapshot schedule with multiples of `every` up to the
    /// horizon.
    pub fn snapshots_every(&mut self, every: f64) -> Result<(), ConfigError> {
        if !(every.is_finite() && every > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "snapshot spacing must be positive, got {every}"
            )));
        }
        let count = (self.scenario.horizon / every + 1e-9).floor() as usize;
        self.scenario.snapshots = (1..=count).map(|k| k as f64 * every).collect();
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        self.grid.build()?;
        self.stepper
            .validate()
            .map_err(|e| ConfigError::Stepper(e.to_string()))?;
        self.scenario.validate()?;
        let snaps = &self.scenario.snapshots;
        if snaps.windows(2).any(|w| w[1] <= w[0]) || snaps.iter().any(|t| !(*t >= 0.0)) {
            return Err(ConfigError::Invalid(
                "snapshot times must be nonnegative and strictly increasing".into(),
            ));
        }
        if snaps.last().is_some_and(|&t| t > self.scenario.horizon) {
            return Err(ConfigError::Invalid("snapshot time beyond the horizon".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, GridError> {
        self.grid.build()
    }
}
