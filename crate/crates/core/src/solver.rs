//! Solvers for the backward-Euler diffusion systems `(I - c A) x = b`.
//!
//! `A` is a [`DiffusionOperator`], so `I - c A` is symmetric positive
//! definite for `c >= 0`. Two routes are provided: unpreconditioned conjugate
//! gradients for arbitrary face coefficients, and an exact solve in the
//! cosine eigenbasis of the Neumann Laplacian for constant coefficients.
//! Both are judged only by the residual they leave behind.

use std::fmt;
use std::sync::Arc;

use rustdct::{Dct2, Dct3, DctPlanner};
use thiserror::Error;

use crate::discretization::DiffusionOperator;
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("linear solve stalled after {iterations} iterations with relative residual {residual:e} (tolerance {tol:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error("time-step factor must be finite and nonnegative, got {0}")]
    BadFactor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `||b - (I - cA) x|| / ||b||`.
    pub relative_residual: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = x - c A x`.
fn apply_shifted(op: &DiffusionOperator, c: f64, x: &[f64], out: &mut [f64]) {
    op.apply_into(x, out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi - c * *o;
    }
}

/// Relative residual of `x` for `(I - c A) x = b`.
pub fn relative_residual(op: &DiffusionOperator, c: f64, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    apply_shifted(op, c, x, &mut ax);
    let r2: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum();
    let b2 = dot(b, b);
    if b2 == 0.0 {
        r2.sqrt()
    } else {
        (r2 / b2).sqrt()
    }
}

/// Conjugate gradients on `(I - c A) x = b`, starting from `x`.
///
/// No preconditioner is applied. With `x = b` as the initial guess every
/// residual stays orthogonal to the constant vector, so the solve preserves
/// `sum(x) = sum(b)` to round-off.
pub fn conjugate_gradient(
    op: &DiffusionOperator,
    c: f64,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<SolveStats, SolveError> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(SolveError::BadFactor(c));
    }
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|xi| *xi = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply_shifted(op, c, x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let target = tol * bnorm;
    let mut it = 0;
    while rr.sqrt() > target {
        if it >= max_iters {
            return Err(SolveError::NotConverged {
                iterations: it,
                residual: rr.sqrt() / bnorm,
                tol,
            });
        }
        apply_shifted(op, c, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
        it += 1;
    }
    Ok(SolveStats {
        iterations: it,
        relative_residual: rr.sqrt() / bnorm,
    })
}

/// Eigenvalues of the 1D cell-centered Neumann Laplacian with `n` cells of
/// width `h`. Mode `k` is `cos(pi k (i + 1/2) / n)`, the DCT-II basis.
fn neumann_eigenvalues(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let s = (std::f64::consts::PI * k as f64 / (2.0 * n as f64)).sin();
            -4.0 * s * s / (h * h)
        })
        .collect()
}

/// Direct solver for constant-coefficient diffusion. A DCT-II along x
/// decouples the x modes of the Neumann Laplacian; each mode leaves a
/// tridiagonal system along y, solved by elimination before a DCT-III
/// transforms back.
#[derive(Clone)]
pub struct SpectralSolver {
    grid: Grid,
    dct2_x: Arc<dyn Dct2<f64>>,
    dct3_x: Arc<dyn Dct3<f64>>,
    eig_x: Vec<f64>,
}

impl fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSolver").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl SpectralSolver {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = DctPlanner::new();
        Self {
            grid: *grid,
            dct2_x: planner.plan_dct2(grid.nx),
            dct3_x: planner.plan_dct3(grid.nx),
            eig_x: neumann_eigenvalues(grid.nx, grid.hx),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Solves `(I - c k L) x = b` where `L` is the unit-diffusivity Laplacian.
    pub fn solve_into(&self, c_times_k: f64, b: &[f64], x: &mut [f64]) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let scratch_len = self.dct2_x.get_scratch_len().max(self.dct3_x.get_scratch_len());
        let mut scratch = vec![0.0; scratch_len];
        x.copy_from_slice(b);
        for row in x.chunks_exact_mut(nx) {
            self.dct2_x.process_dct2_with_scratch(row, &mut scratch);
        }

        // rows j of x hold the right-hand sides of all modes at once
        let off = -c_times_k / (self.grid.hy * self.grid.hy);
        let mut cp = vec![0.0; nx * ny];
        for j in 0..ny {
            let neighbours = (j > 0) as u8 + (j + 1 < ny) as u8;
            let base = 1.0 - off * f64::from(neighbours);
            let (done, rest) = x.split_at_mut(j * nx);
            let row = &mut rest[..nx];
            let (cp_done, cp_rest) = cp.split_at_mut(j * nx);
            let cp_row = &mut cp_rest[..nx];
            if j == 0 {
                for k in 0..nx {
                    let inv = 1.0 / (base - c_times_k * self.eig_x[k]);
                    cp_row[k] = off * inv;
                    row[k] *= inv;
                }
            } else {
                let prev = &done[(j - 1) * nx..];
                let cp_prev = &cp_done[(j - 1) * nx..];
                for k in 0..nx {
                    let inv = 1.0 / (base - c_times_k * self.eig_x[k] - off * cp_prev[k]);
                    cp_row[k] = off * inv;
                    row[k] = (row[k] - off * prev[k]) * inv;
                }
            }
        }
        for j in (0..ny.saturating_sub(1)).rev() {
            let (head, tail) = x.split_at_mut((j + 1) * nx);
            let row = &mut head[j * nx..];
            let next = &tail[..nx];
            let cp_row = &cp[j * nx..(j + 1) * nx];
            for k in 0..nx {
                row[k] -= cp_row[k] * next[k];
            }
        }

        let scale = 2.0 / nx as f64;
        for row in x.chunks_exact_mut(nx) {
            self.dct3_x.process_dct3_with_scratch(row, &mut scratch);
            for r in row.iter_mut() {
                *r *= scale;
            }
        }
    }
}

/// Which route a [`DiffusionSolve`] takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    ConjugateGradient,
    Spectral,
}

/// Solves `(I - dt A) x = b` for the supplied operator, choosing the
/// spectral route when `A` has a constant coefficient and a matching
/// eigenbasis is available. The residual is always checked; a spectral
/// result that misses the tolerance is polished with conjugate gradients.
pub fn solve_backward_euler(
    op: &DiffusionOperator,
    dt: f64,
    b: &[f64],
    x: &mut [f64],
    spectral: Option<&SpectralSolver>,
    tol: f64,
    max_iters: usize,
) -> Result<(SolverKind, SolveStats), SolveError> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(SolveError::BadFactor(dt));
    }
    if let (Some(k), Some(sp)) = (op.constant_diffusivity(), spectral) {
        if sp.grid() == op.grid() {
            sp.solve_into(dt * k, b, x);
            let res = relative_residual(op, dt, b, x);
            if res <= tol {
                return Ok((
                    SolverKind::Spectral,
                    SolveStats {
                        iterations: 0,
                        relative_residual: res,
                    },
                ));
            }
            let stats = conjugate_gradient(op, dt, b, x, tol, max_iters)?;
            return Ok((SolverKind::Spectral, stats));
        }
    }
    x.copy_from_slice(b);
    let stats = conjugate_gradient(op, dt, b, x, tol, max_iters)?;
    Ok((SolverKind::ConjugateGradient, stats))
}
