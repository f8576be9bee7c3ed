use buruli::coefficients::ReceptorKinetics;
use buruli::lattice::{
    convergence_study, error_ratios, master_step, run_lattice, HeatKernelReference, LatticeConfig, PdeReference,
    Profile, StudySetup, TargetSolution,
};
use proptest::prelude::*;

#[test]
fn lattice_approaches_continuum_limit() {
    let setup = StudySetup::smooth_default();
    let reference = PdeReference::solve(&setup, 1280, 1e-3).unwrap();
    let rows = convergence_study(&reference, &setup, &[20, 40, 80]).unwrap();
    let ratios = error_ratios(&rows);
    for (r, q) in rows.iter().skip(1).zip(&ratios) {
        assert!(*q > 1.5 && *q < 4.5, "N {}: ratio {q}", r.num_nodes);
    }
    for r in &rows {
        // 2 lambda h^2 = D at every resolution
        assert!((2.0 * r.jump_rate * r.h * r.h - setup.diffusivity).abs() < 1e-15);
        assert!(r.mass_drift.abs() < 1e-13);
    }
}

#[test]
fn pure_diffusion_matches_heat_kernel() {
    let setup = StudySetup::pure_diffusion(0.02, 0.5, 0.4, 0.005);
    let kernel = HeatKernelReference::for_setup(&setup).unwrap();
    let rows = convergence_study(&kernel, &setup, &[20, 40, 80]).unwrap();
    let ratios = error_ratios(&rows);
    assert!(ratios.iter().all(|&q| (q - 4.0).abs() < 1.0), "{ratios:?}");
    assert!(rows[2].l2_error < 1e-3);
}

#[test]
fn heat_kernel_target_keeps_mass() {
    let setup = StudySetup::pure_diffusion(0.02, 0.5, 0.4, 0.005);
    let kernel = HeatKernelReference::for_setup(&setup).unwrap();
    let n = 400;
    let mass: f64 = kernel.sample(n).unwrap().iter().sum::<f64>() / n as f64;
    let want = match setup.initial {
        Profile::ReflectedGaussian { mass, .. } => mass,
        _ => unreachable!(),
    };
    assert!((mass - want).abs() < 1e-9);
}

#[test]
fn reference_needs_commensurate_lattice() {
    let setup = StudySetup::smooth_default();
    let reference = PdeReference::solve(&setup, 40, 1e-2).unwrap();
    assert!(reference.sample(30).is_err());
    assert!(reference.sample(20).is_ok());
}

fn config(n: usize) -> LatticeConfig {
    let setup = StudySetup::smooth_default();
    LatticeConfig::new(n, setup.diffusivity, ReceptorKinetics::default(), &setup.tissue, &setup.necrotic, 0.45)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn master_step_conserves_and_keeps_sign(u in proptest::collection::vec(0.0f64..2.0, 24)) {
        let cfg = config(24);
        let next = master_step(&u, &cfg).unwrap();
        let before: f64 = u.iter().sum();
        let after: f64 = next.iter().sum();
        prop_assert!((before - after).abs() < 1e-12 * before.max(1.0));
        prop_assert!(next.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn lattice_runs_conserve_mass(u in proptest::collection::vec(0.0f64..1.0, 16), t in 0.0f64..0.3) {
        let cfg = config(16);
        let run = run_lattice(&u, &cfg, t).unwrap();
        let before: f64 = u.iter().sum();
        let after: f64 = run.u.iter().sum();
        prop_assert!((before - after).abs() < 1e-11 * before.max(1.0));
    }
}
