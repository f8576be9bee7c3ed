use buruli::scenarios::{initial_tissue_difference, ScenarioRun};
use buruli::{
    compare_runs, integrate, run_scenario, scenario_params, DimensionalParams, Grid, ModelKind, ScenarioId,
    ScenarioSpec, Species, StepperConfig,
};

fn short(id: ScenarioId, model: ModelKind) -> ScenarioRun {
    let mut spec = scenario_params(id).unwrap();
    spec.model = model;
    spec.horizon = 10.0;
    spec.snapshots = vec![2.5, 5.0, 7.5, 10.0];
    let dims = buruli::scenarios::scenario_dimensional(id, &DimensionalParams::default());
    run_scenario(&spec, &dims, &Grid::square(24).unwrap(), &StepperConfig::default()).unwrap()
}

#[test]
fn runs_are_bitwise_reproducible() {
    let a = short(ScenarioId::S2, ModelKind::Linear);
    let b = short(ScenarioId::S2, ModelKind::Linear);
    assert_eq!(a.initial, b.initial);
    assert_eq!(a.snapshots(), b.snapshots());
    assert_eq!(a.output.report, b.output.report);
}

#[test]
fn every_scenario_keeps_its_invariants() {
    for id in ScenarioId::PAPER {
        for model in [ModelKind::Linear, ModelKind::Nonlinear] {
            let run = short(id, model);
            let r = &run.output.report;
            assert!(r.is_valid(), "{id} {model:?}: {:?}", r.checks);
            assert!(r.max_m <= 0.002 + 1e-6, "{id} {model:?}: max m {}", r.max_m);
            assert!(r.min_value.iter().all(|&x| x >= -1e-8));
            // tissue is only ever destroyed
            let mut prev = &run.initial.v;
            for s in run.snapshots() {
                assert!(s.v.values().iter().zip(prev.values()).all(|(a, b)| a <= b));
                prev = &s.v;
            }
        }
    }
}

#[test]
fn snapshots_land_on_the_schedule() {
    let run = short(ScenarioId::S1, ModelKind::Linear);
    let ts: Vec<f64> = run.snapshots().iter().map(|s| s.t).collect();
    assert_eq!(ts, vec![2.5, 5.0, 7.5, 10.0]);
}

#[test]
fn chemotaxis_scenario_stays_close_to_baseline() {
    let a = short(ScenarioId::S1, ModelKind::Linear);
    let b = short(ScenarioId::S4, ModelKind::Linear);
    let diffs = compare_runs(a.snapshots(), b.snapshots()).unwrap();
    assert_eq!(diffs.len(), 4);
    for d in &diffs {
        for s in Species::ALL {
            assert!(d.sup_of(s) < 0.05, "t {} {:?} {}", d.t, s, d.sup_of(s));
        }
    }
    // the runs do differ
    assert!(diffs.iter().any(|d| d.sup_of(Species::Bacteria) > 0.0));
}

#[test]
fn small_tissue_scenario_scales_the_draw() {
    let g = Grid::square(16).unwrap();
    let s1 = buruli::build_initial_state(&scenario_params(ScenarioId::S1).unwrap().ic, &g, 11).unwrap();
    let s5 = buruli::build_initial_state(&scenario_params(ScenarioId::S5).unwrap().ic, &g, 11).unwrap();
    for (a, b) in s1.v.values().iter().zip(s5.v.values()) {
        assert!((b - 1e-4 * a).abs() <= 1e-18 * a.abs().max(1.0));
    }
    assert_eq!(s1.u, s5.u);
    assert_eq!(s1.m, s5.m);
    let d = initial_tissue_difference(&g, 11).unwrap();
    for (x, a) in d.values().iter().zip(s1.v.values()) {
        assert!((x - (1.0 - 1e-4) * a).abs() < 1e-15);
    }
}

#[test]
fn different_seeds_differ_only_in_tissue() {
    let g = Grid::square(12).unwrap();
    let spec = ScenarioSpec::with_params(ScenarioId::S1, &DimensionalParams::default()).unwrap();
    let a = buruli::build_initial_state(&spec.ic, &g, 1).unwrap();
    let b = buruli::build_initial_state(&spec.ic, &g, 2).unwrap();
    assert_eq!(a.u, b.u);
    assert_ne!(a.v, b.v);
    assert!((integrate(&a.v) - 0.5).abs() < 0.1);
}
