//! Finite-difference simulator for two reaction-diffusion-taxis models of
//! Buruli ulcer spread: bacteria `u`, mycolactone `m`, normal tissue `v` and
//! necrotic matter `n` on the unit square with no-flux boundaries.
//!
//! The linear model carries constant bacteria diffusion and double
//! haptotaxis; the nonlinear model carries density-dependent diffusion and
//! taxis obtained from a lattice position-jump process. [`lattice`] checks
//! that process against its continuum limit in one dimension.

pub mod coefficients;
pub mod config;
pub mod discretization;
pub mod grid;
pub mod lattice;
pub mod output;
pub mod params;
pub mod scenarios;
pub mod solver;
pub mod stepper;

pub use discretization::ModelKind;
pub use grid::{integrate, sup_norm, Field, Grid, Species, State};
pub use params::{nondimensionalize_linear, nondimensionalize_nonlinear, DimensionalParams, NondimParams};
pub use stepper::{Integrator, StepperConfig};
pub use scenarios::{build_initial_state, compare_runs, run_scenario, scenario_params, ScenarioId, ScenarioSpec};
