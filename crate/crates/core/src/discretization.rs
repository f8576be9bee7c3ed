//! Flux-form spatial operators on the cell-centered grid.
//!
//! Every operator is assembled face by face: a flux is computed once per
//! interior face and added to one neighbour while subtracted from the other.
//! Boundary faces carry no flux at all, which is the discrete form of the
//! no-flux condition and makes every operator conserve the integral exactly.

use thiserror::Error;

use crate::coefficients::unchecked as coef;
use crate::grid::{Field, Grid, GridError, State};
use crate::params::NondimParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizationError {
    #[error("diffusivity must be positive and finite, got {value} at cell {cell}")]
    NonPositiveDiffusivity { cell: usize, value: f64 },
    #[error("face array has {got} entries, expected {expected}")]
    FaceCount { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Which bacteria motility law to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Constant diffusion with double haptotaxis (kinetic derivation).
    Linear,
    /// Density-dependent diffusion and taxis (position-jump derivation).
    Nonlinear,
}

/// Per-face values. `x[j * (nx - 1) + i]` sits between cells `(i, j)` and
/// `(i + 1, j)`; `y[j * nx + i]` between `(i, j)` and `(i, j + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceValues {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceValues {
    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            x: vec![c; (grid.nx - 1) * grid.ny],
            y: vec![c; grid.nx * (grid.ny - 1)],
        }
    }

    /// Evaluates `f(a, b)` on the two cell indices adjacent to every face.
    pub fn from_cells(grid: &Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut x = Vec::with_capacity((nx - 1) * ny);
        for j in 0..ny {
            for i in 0..nx - 1 {
                let a = grid.idx(i, j);
                x.push(f(a, a + 1));
            }
        }
        let mut y = Vec::with_capacity(nx * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx {
                let a = grid.idx(i, j);
                y.push(f(a, a + nx));
            }
        }
        Self { x, y }
    }

    /// Arithmetic mean of a cell field onto faces.
    pub fn mean_of(field: &Field) -> Self {
        let v = field.values();
        Self::from_cells(field.grid(), |a, b| 0.5 * (v[a] + v[b]))
    }

    fn check(&self, grid: &Grid) -> Result<(), DiscretizationError> {
        let ex = (grid.nx - 1) * grid.ny;
        let ey = grid.nx * (grid.ny - 1);
        if self.x.len() != ex {
            return Err(DiscretizationError::FaceCount {
                expected: ex,
                got: self.x.len(),
            });
        }
        if self.y.len() != ey {
            return Err(DiscretizationError::FaceCount {
                expected: ey,
                got: self.y.len(),
            });
        }
        Ok(())
    }
}

/// Visits every interior face as `(face_slot, cell_a, cell_b, spacing)`, with
/// `cell_b` the neighbour in the positive axis direction. `face_slot` indexes
/// `FaceValues::x` for x-faces and `FaceValues::y` offset by the x count.
#[inline]
fn for_each_face(grid: &Grid, mut f: impl FnMut(usize, usize, usize, f64)) {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut slot = 0;
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx - 1 {
            f(slot, row + i, row + i + 1, grid.hx);
            slot += 1;
        }
    }
    for j in 0..ny - 1 {
        let row = j * nx;
        for i in 0..nx {
            f(slot, row + i, row + i + nx, grid.hy);
            slot += 1;
        }
    }
}

pub enum Diffusivity<'a> {
    Constant(f64),
    /// Cell-centered values, averaged arithmetically onto faces.
    Cells(&'a Field),
}

/// Five-point operator `f -> div(k grad f)` with zero normal flux on the
/// boundary. Symmetric, negative semidefinite, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    grid: Grid,
    faces: FaceValues,
    constant: Option<f64>,
}

pub fn diffusion_matrix(
    grid: &Grid,
    diffusivity: Diffusivity<'_>,
) -> Result<DiffusionOperator, DiscretizationError> {
    match diffusivity {
        Diffusivity::Constant(k) => {
            if !(k.is_finite() && k > 0.0) {
                return Err(DiscretizationError::NonPositiveDiffusivity { cell: 0, value: k });
            }
            Ok(DiffusionOperator {
                grid: *grid,
                faces: FaceValues::constant(grid, k),
                constant: Some(k),
            })
        }
        Diffusivity::Cells(field) => {
            if field.grid().nx != grid.nx || field.grid().ny != grid.ny {
                return Err(GridError::Mismatch {
                    left: *grid,
                    right: *field.grid(),
                }
                .into());
            }
            if let Some(cell) = field.values().iter().position(|k| !(k.is_finite() && *k > 0.0)) {
                return Err(DiscretizationError::NonPositiveDiffusivity {
                    cell,
                    value: field.values()[cell],
                });
            }
            Ok(DiffusionOperator {
                grid: *grid,
                faces: FaceValues::mean_of(field),
                constant: None,
            })
        }
    }
}

impl DiffusionOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The diffusivity when it is the same on every face.
    pub fn constant_diffusivity(&self) -> Option<f64> {
        self.constant
    }

    pub fn faces(&self) -> &FaceValues {
        &self.faces
    }

    /// `out = A f`.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        out.fill(0.0);
        let ax = 1.0 / (self.grid.hx * self.grid.hx);
        let ay = 1.0 / (self.grid.hy * self.grid.hy);
        for j in 0..ny {
            let kx = &self.faces.x[j * (nx - 1)..(j + 1) * (nx - 1)];
            let fr = &f[j * nx..(j + 1) * nx];
            let or = &mut out[j * nx..(j + 1) * nx];
            for i in 0..nx - 1 {
                let flux = kx[i] * ax * (fr[i + 1] - fr[i]);
                or[i] += flux;
                or[i + 1] -= flux;
            }
        }
        for j in 0..ny - 1 {
            let ky = &self.faces.y[j * nx..(j + 1) * nx];
            let (lo, hi) = out.split_at_mut((j + 1) * nx);
            let lo = &mut lo[j * nx..];
            let hi = &mut hi[..nx];
            let (f0, f1) = (&f[j * nx..(j + 1) * nx], &f[(j + 1) * nx..(j + 2) * nx]);
            for i in 0..nx {
                let flux = ky[i] * ay * (f1[i] - f0[i]);
                lo[i] += flux;
                hi[i] -= flux;
            }
        }
    }

    pub fn apply(&self, f: &Field) -> Result<Field, DiscretizationError> {
        if f.grid() != &self.grid {
            return Err(GridError::Mismatch {
                left: self.grid,
                right: *f.grid(),
            }
            .into());
        }
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(f.values(), &mut out);
        Ok(Field::from_vec(self.grid, out)?)
    }

    /// Diagonal entries of `A`.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.grid.len()];
        let nxf = self.faces.x.len();
        for_each_face(&self.grid, |slot, a, b, h| {
            let k = if slot < nxf {
                self.faces.x[slot]
            } else {
                self.faces.y[slot - nxf]
            };
            d[a] -= k / (h * h);
            d[b] -= k / (h * h);
        });
        d
    }

    /// Dense row-major copy, for inspection on small grids.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.grid.len();
        let mut a = vec![vec![0.0; n]; n];
        let nxf = self.faces.x.len();
        for_each_face(&self.grid, |slot, p, q, h| {
            let k = if slot < nxf {
                self.faces.x[slot]
            } else {
                self.faces.y[slot - nxf]
            };
            let w = k / (h * h);
            a[p][q] += w;
            a[q][p] += w;
            a[p][p] -= w;
            a[q][q] -= w;
        });
        a
    }
}

/// Adds the upwinded divergence `-div(s u grad phi)` into `out`. When
/// `outflow` is given, the rate at which each cell loses its content through
/// its faces is accumulated there (in units of 1/time).
#[inline]
fn accumulate_upwind(
    grid: &Grid,
    carried: &[f64],
    potential: &[f64],
    sens: impl FnMut(usize, usize, usize) -> f64,
    out: &mut [f64],
    outflow: Option<&mut [f64]>,
) {
    match outflow {
        Some(rate) => upwind_pass::<true>(grid, carried, potential, sens, out, rate),
        None => upwind_pass::<false>(grid, carried, potential, sens, out, &mut []),
    }
}

#[inline]
fn upwind_pass<const RATE: bool>(
    grid: &Grid,
    carried: &[f64],
    potential: &[f64],
    mut sens: impl FnMut(usize, usize, usize) -> f64,
    out: &mut [f64],
    rate: &mut [f64],
) {
    let nxf = (grid.nx - 1) * grid.ny;
    let (ihx, ihy) = (1.0 / grid.hx, 1.0 / grid.hy);
    for_each_face(grid, |slot, a, b, _| {
        let s = sens(slot, a, b);
        if s == 0.0 {
            return;
        }
        let ih = if slot < nxf { ihx } else { ihy };
        let w = s * (potential[b] - potential[a]) * ih;
        let donor = if w > 0.0 {
            carried[a]
        } else if w < 0.0 {
            carried[b]
        } else {
            return;
        };
        let flux = w * donor * ih;
        out[a] -= flux;
        out[b] += flux;
        if RATE {
            if w > 0.0 {
                rate[a] += w * ih;
            } else {
                rate[b] -= w * ih;
            }
        }
    });
}

/// Upwind taxis up two potentials whose face sensitivities share the factor
/// `sens`, scaled by `k[0]` and `k[1]`.
fn haptotaxis_pass<const RATE: bool>(
    grid: &Grid,
    carried: &[f64],
    potentials: [&[f64]; 2],
    k: [f64; 2],
    sens: impl Fn(usize, usize) -> f64,
    out: &mut [f64],
    rate: &mut [f64],
) {
    let nxf = (grid.nx - 1) * grid.ny;
    let (ihx, ihy) = (1.0 / grid.hx, 1.0 / grid.hy);
    for_each_face(grid, |slot, a, b, _| {
        let s = sens(a, b);
        let ih = if slot < nxf { ihx } else { ihy };
        let mut flux = 0.0;
        let mut drain = [0.0; 2];
        for (phi, kp) in potentials.iter().zip(k) {
            let w = kp * s * (phi[b] - phi[a]) * ih;
            if w > 0.0 {
                flux += w * carried[a] * ih;
                drain[0] += w * ih;
            } else if w < 0.0 {
                flux += w * carried[b] * ih;
                drain[1] -= w * ih;
            }
        }
        out[a] -= flux;
        out[b] += flux;
        if RATE {
            rate[a] += drain[0];
            rate[b] += drain[1];
        }
    });
}

/// First-order upwind approximation of `-div(s u grad phi)` with face
/// sensitivities `s`. The face drift is `s` times the two-point gradient of
/// the potential; the carried density is taken from the upstream cell.
pub fn upwind_taxis_div(
    grid: &Grid,
    carried: &Field,
    sensitivity_at_faces: &FaceValues,
    potential: &Field,
) -> Result<Field, DiscretizationError> {
    for f in [carried, potential] {
        if f.grid() != grid {
            return Err(GridError::Mismatch {
                left: *grid,
                right: *f.grid(),
            }
            .into());
        }
    }
    sensitivity_at_faces.check(grid)?;
    let nxf = sensitivity_at_faces.x.len();
    let mut out = vec![0.0; grid.len()];
    accumulate_upwind(
        grid,
        carried.values(),
        potential.values(),
        |slot, _, _| {
            if slot < nxf {
                sensitivity_at_faces.x[slot]
            } else {
                sensitivity_at_faces.y[slot - nxf]
            }
        },
        &mut out,
        None,
    );
    Ok(Field::from_raw(*grid, out))
}

fn taxis_terms(state: &State, model: ModelKind, np: &NondimParams, out: &mut [f64], mut outflow: Option<&mut [f64]>) {
    let grid = state.grid();
    let u = state.u.values();
    let m = state.m.values();
    let v = state.v.values();
    let n = state.n.values();
    match model {
        ModelKind::Linear => {
            let k1 = np.du * np.g1;
            let k2 = np.du * np.g2;
            if k1 != 0.0 || k2 != 0.0 {
                let rate = outflow.as_deref_mut();
                let sens = |a: usize, b: usize| coef::a_sens(0.5 * (v[a] + v[b]), 0.5 * (n[a] + n[b]));
                match rate {
                    Some(r) => haptotaxis_pass::<true>(grid, u, [n, v], [k1, k2], sens, out, r),
                    None => haptotaxis_pass::<false>(grid, u, [n, v], [k1, k2], sens, out, &mut []),
                }
            }
        }
        ModelKind::Nonlinear => {
            let d = np.d_jump;
            if d != 0.0 {
                // chi1 already contains one factor u; the other is the carried density.
                accumulate_upwind(
                    grid,
                    u,
                    v,
                    |_, a, b| {
                        let uf = 0.5 * (u[a] + u[b]);
                        let vf = 0.5 * (v[a] + v[b]);
                        let s = 1.0 + uf * vf;
                        d * uf / (s * s)
                    },
                    out,
                    outflow.as_deref_mut(),
                );
            }
            let chin = np.chi_n;
            if chin != 0.0 {
                accumulate_upwind(
                    grid,
                    u,
                    n,
                    |_, a, b| {
                        let uf = 0.5 * (u[a] + u[b]);
                        let nf = 0.5 * (n[a] + n[b]);
                        let s = 1.0 + nf;
                        chin / (s * s * (1.0 + uf * nf))
                    },
                    out,
                    outflow.as_deref_mut(),
                );
            }
        }
    }
    if np.g3 != 0.0 {
        let g3 = np.g3;
        accumulate_upwind(grid, u, m, |_, _, _| g3, out, outflow);
    }
}

/// Sum of all taxis divergences of the bacteria equation for `model`.
pub fn advect_all_taxis(state: &State, model: ModelKind, np: &NondimParams) -> Field {
    let grid = *state.grid();
    let mut out = vec![0.0; grid.len()];
    taxis_terms(state, model, np, &mut out, None);
    Field::from_raw(grid, out)
}

/// Taxis divergence together with the largest per-cell outflow rate.
pub(crate) fn taxis_with_outflow(state: &State, model: ModelKind, np: &NondimParams) -> (Vec<f64>, f64) {
    let grid = state.grid();
    let mut out = vec![0.0; grid.len()];
    let mut rate = vec![0.0; grid.len()];
    taxis_terms(state, model, np, &mut out, Some(&mut rate));
    let max_rate = rate.iter().copied().fold(0.0, f64::max);
    (out, max_rate)
}

/// Largest rate at which upwind taxis drains a single cell.
pub fn max_outflow_rate(state: &State, model: ModelKind, np: &NondimParams) -> f64 {
    taxis_with_outflow(state, model, np).1
}
