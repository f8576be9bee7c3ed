//! Independent oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use buruli::discretization::{diffusion_matrix, upwind_taxis_div, Diffusivity, FaceValues};
use buruli::params::{nondimensionalize_linear, DimensionalParams, NondimParams};
use buruli::scenarios::{build_initial_state, InitialConditionSpec};
use buruli::{integrate, Field, Grid, Integrator, ModelKind, State, StepperConfig};

/// Observed orders `log2(e_k / e_{k+1})` for grids refined by two.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Max-norm consistency error of the variable-coefficient diffusion
/// operator on `f = cos(pi x) cos(2 pi y)`, `k = 1 + 0.3 x^2 + 0.2 y`.
pub fn diffusion_consistency_error(n: usize) -> f64 {
    let g = Grid::square(n).unwrap();
    let k = Field::from_fn(g, |x, y| 1.0 + 0.3 * x * x + 0.2 * y);
    let f = Field::from_fn(g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos());
    let exact = Field::from_fn(g, |x, y| {
        let kk = 1.0 + 0.3 * x * x + 0.2 * y;
        let ff = (PI * x).cos() * (2.0 * PI * y).cos();
        let fx = -PI * (PI * x).sin() * (2.0 * PI * y).cos();
        let fy = -2.0 * PI * (PI * x).cos() * (2.0 * PI * y).sin();
        0.6 * x * fx + 0.2 * fy - 5.0 * PI * PI * kk * ff
    });
    let op = diffusion_matrix(&g, Diffusivity::Cells(&k)).unwrap();
    max_abs_diff(op.apply(&f).unwrap().values(), exact.values())
}

/// Max-norm consistency error of upwind taxis `-div(s u grad phi)` with
/// `u = 1 + 0.5 x y`, `s = 1 + 0.3 x`, `phi = cos(pi x) + cos(pi y)`.
pub fn taxis_consistency_error(n: usize) -> f64 {
    let g = Grid::square(n).unwrap();
    let u = Field::from_fn(g, |x, y| 1.0 + 0.5 * x * y);
    let phi = Field::from_fn(g, |x, y| (PI * x).cos() + (PI * y).cos());
    let centers: Vec<(f64, f64)> = (0..g.ny)
        .flat_map(|j| (0..g.nx).map(move |i| (i, j)))
        .map(|(i, j)| g.center(i, j))
        .collect();
    let s = FaceValues::from_cells(&g, |a, b| 1.0 + 0.3 * 0.5 * (centers[a].0 + centers[b].0));
    let exact = Field::from_fn(g, |x, y| {
        let uu = 1.0 + 0.5 * x * y;
        let ss = 1.0 + 0.3 * x;
        let (px, py) = (-PI * (PI * x).sin(), -PI * (PI * y).sin());
        let (pxx, pyy) = (-PI * PI * (PI * x).cos(), -PI * PI * (PI * y).cos());
        let dx = 0.3 * uu * px + ss * 0.5 * y * px + ss * uu * pxx;
        let dy = ss * 0.5 * x * py + ss * uu * pyy;
        -(dx + dy)
    });
    let got = upwind_taxis_div(&g, &u, &s, &phi).unwrap();
    max_abs_diff(got.values(), exact.values())
}

/// Tissue parameters used by the frozen-mycolactone oracle.
#[derive(Debug, Clone, Copy)]
pub struct TissueRates {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
}

/// Exact `(v, n)` at time `t` for constant mycolactone `m0`.
pub fn tissue_exact(r: TissueRates, m0: f64, v0: f64, n0: f64, t: f64) -> (f64, f64) {
    let a = r.beta1 * m0;
    let v = v0 * (-a * t).exp();
    let n = if (r.gamma - a).abs() < 1e-12 {
        n0 * (-r.gamma * t).exp() + r.beta2 * m0 * v0 * t * (-r.gamma * t).exp()
    } else {
        n0 * (-r.gamma * t).exp() + r.beta2 * m0 * v0 * ((-a * t).exp() - (-r.gamma * t).exp()) / (r.gamma - a)
    };
    (v, n)
}

pub fn table_params() -> NondimParams {
    nondimensionalize_linear(&DimensionalParams::default()).unwrap()
}

/// Frozen-mycolactone problem: no bacteria, a uniform mycolactone level
/// and no decay, so `m` stays put while `v` and `n` follow their ODEs.
/// Returns the max errors of `v` and `n` at `t_end` for step `dt`.
pub fn frozen_m_errors(m0: f64, dt: f64, t_end: f64) -> (f64, f64) {
    let g = Grid::square(6).unwrap();
    let np = NondimParams {
        delta: 0.0,
        lambda: 0.0,
        ..table_params()
    };
    let r = TissueRates {
        beta1: np.beta1,
        beta2: np.beta2,
        gamma: np.gamma,
    };
    let v0 = Field::from_fn(g, |x, y| 0.2 + 0.7 * x * (1.0 - 0.5 * y));
    let n0 = Field::from_fn(g, |x, y| 0.05 * (1.0 + x + y));
    let initial = State {
        u: Field::zeros(g),
        m: Field::constant(g, m0),
        v: v0.clone(),
        n: n0.clone(),
        t: 0.0,
    };
    let cfg = StepperConfig {
        dt,
        ..StepperConfig::default()
    };
    let integ = Integrator::new(&g, ModelKind::Linear, &np, &cfg).unwrap();
    let out = integ.run(&initial, t_end, &[t_end]).unwrap();
    let last = out.snapshots.last().unwrap();
    assert!(out.report.dt_max <= dt * (1.0 + 1e-12));
    assert!(last.m.values().iter().all(|&m| (m - m0).abs() < 1e-15), "mycolactone moved");
    let (mut ev, mut en) = (0.0f64, 0.0f64);
    for k in 0..g.len() {
        let (v, n) = tissue_exact(r, m0, v0.values()[k], n0.values()[k], t_end);
        ev = ev.max((last.v.values()[k] - v).abs());
        en = en.max((last.n.values()[k] - n).abs());
    }
    (ev, en)
}

/// Transport-only problem: every reaction coefficient is zero and there is
/// no necrotic matter, so bacteria growth vanishes too. Returns the drifts
/// of `integrate(u)` and `integrate(m)` over `steps` steps.
pub fn transport_only_drift(model: ModelKind, n: usize, steps: usize) -> (f64, f64) {
    let g = Grid::square(n).unwrap();
    let base = match model {
        ModelKind::Linear => table_params(),
        ModelKind::Nonlinear => buruli::nondimensionalize_nonlinear(&DimensionalParams::default()).unwrap(),
    };
    let np = NondimParams {
        g1: 1e-2,
        g2: 1e-2,
        g3: 1e-2,
        delta: 0.0,
        lambda: 0.0,
        beta1: 0.0,
        beta2: 0.0,
        gamma: 0.0,
        ..base
    };
    let mut s = build_initial_state(&InitialConditionSpec::default(), &g, 7).unwrap();
    s.n = Field::zeros(g);
    s.m = Field::from_fn(g, |x, y| 0.001 * (-((x - 0.3).powi(2) + (y - 0.6).powi(2)) / 0.02).exp());
    let dt = 0.01;
    let cfg = StepperConfig {
        dt,
        ..StepperConfig::default()
    };
    let integ = Integrator::new(&g, model, &np, &cfg).unwrap();
    let t_end = steps as f64 * dt;
    let (u0, m0) = (integrate(&s.u), integrate(&s.m));
    let out = integ.run(&s, t_end, &[]).unwrap();
    assert_eq!(out.report.steps, steps, "step count");
    let last = out.snapshots.last().unwrap();
    ((integrate(&last.u) - u0).abs(), (integrate(&last.m) - m0).abs())
}

/// Right-hand side of the kinetics for spatially uniform fields.
pub fn uniform_rhs(np: &NondimParams, y: [f64; 4]) -> [f64; 4] {
    let [u, m, v, n] = y;
    [
        n / (1.0 + n) * u * (1.0 - u - v - n),
        np.delta * u / (1.0 + u) - np.lambda * m,
        -np.beta1 * m * v,
        np.beta2 * m * v - np.gamma * n,
    ]
}

/// Classical RK4 solution of the uniform kinetics.
pub fn uniform_rk4(np: &NondimParams, y0: [f64; 4], t_end: f64, steps: usize) -> [f64; 4] {
    let h = t_end / steps as f64;
    let mut y = y0;
    let add = |a: [f64; 4], b: [f64; 4], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]];
    for _ in 0..steps {
        let k1 = uniform_rhs(np, y);
        let k2 = uniform_rhs(np, add(y, k1, h / 2.0));
        let k3 = uniform_rhs(np, add(y, k2, h / 2.0));
        let k4 = uniform_rhs(np, add(y, k3, h));
        for i in 0..4 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Centred moving average over `window` points; near the ends the window
/// shrinks to what is available.
pub fn smooth(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Number of sign changes in a sequence, ignoring exact zeros.
pub fn sign_changes(xs: &[f64]) -> Vec<(usize, f64, f64)> {
    let nz: Vec<(usize, f64)> = xs.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
    nz.windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| (w[1].0, w[0].1, w[1].1))
        .collect()
}
