//! Uniform cell-centered grid on the unit square, scalar fields and the
//! four-component model state.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 4 cells per axis, got {nx}x{ny}")]
    TooCoarse { nx: usize, ny: usize },
    #[error("grid mismatch: {left:?} vs {right:?}")]
    Mismatch { left: Grid, right: Grid },
    #[error("expected {expected} values for the grid, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value {value} at cell ({i}, {j})")]
    NonFinite { i: usize, j: usize, value: f64 },
}

/// Cell-centered grid over `(0,1)^2`. Cell `(i, j)` has center
/// `((i + 1/2) hx, (j + 1/2) hy)`; storage is row-major with `i` fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize) -> Result<Self, GridError> {
        if nx < 4 || ny < 4 {
            return Err(GridError::TooCoarse { nx, ny });
        }
        Ok(Self {
            nx,
            ny,
            hx: 1.0 / nx as f64,
            hy: 1.0 / ny as f64,
        })
    }

    pub fn square(n: usize) -> Result<Self, GridError> {
        Self::new(n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn min_spacing(&self) -> f64 {
        self.hx.min(self.hy)
    }

    fn check_same(&self, other: &Grid) -> Result<(), GridError> {
        if self.nx == other.nx && self.ny == other.ny {
            Ok(())
        } else {
            Err(GridError::Mismatch {
                left: *self,
                right: *other,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let f = Self { grid, values };
        f.check_finite()?;
        Ok(f)
    }

    /// Wraps a buffer whose length is known to match the grid.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn check_finite(&self) -> Result<(), GridError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(GridError::NonFinite {
                i: k % self.grid.nx,
                j: k / self.grid.nx,
                value: self.values[k],
            }),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Position and value of the smallest entry.
    pub fn argmin(&self) -> (usize, usize, f64) {
        let (k, v) = self
            .values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, v)| if v < acc.1 { (k, v) } else { acc });
        (k % self.grid.nx, k / self.grid.nx, v)
    }

    /// Position and value of the largest entry.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let (k, v) = self
            .values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        (k % self.grid.nx, k / self.grid.nx, v)
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field, GridError> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }
}

/// Midpoint quadrature over the unit square.
pub fn integrate(f: &Field) -> f64 {
    f.grid.cell_area() * f.values.iter().sum::<f64>()
}

pub fn sup_norm(f: &Field) -> f64 {
    f.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Pointwise `f - g`.
pub fn diff(f: &Field, g: &Field) -> Result<Field, GridError> {
    f.lin_comb(1.0, g, -1.0)
}

/// Bacteria `u`, mycolactone `m`, normal tissue `v` and necrotic matter `n`,
/// all nondimensional, at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub m: Field,
    pub v: Field,
    pub n: Field,
    pub t: f64,
}

/// Selector for one component of a [`State`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Bacteria,
    Mycolactone,
    Tissue,
    Necrotic,
}

impl Species {
    pub const ALL: [Species; 4] = [
        Species::Bacteria,
        Species::Mycolactone,
        Species::Tissue,
        Species::Necrotic,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Species::Bacteria => "u",
            Species::Mycolactone => "m",
            Species::Tissue => "v",
            Species::Necrotic => "n",
        }
    }
}

impl State {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            u: Field::zeros(grid),
            m: Field::zeros(grid),
            v: Field::zeros(grid),
            n: Field::zeros(grid),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn field(&self, s: Species) -> &Field {
        match s {
            Species::Bacteria => &self.u,
            Species::Mycolactone => &self.m,
            Species::Tissue => &self.v,
            Species::Necrotic => &self.n,
        }
    }

    /// Every component on the same grid with finite values.
    pub fn check_consistent(&self) -> Result<(), GridError> {
        let g = self.grid();
        for s in Species::ALL {
            let f = self.field(s);
            g.check_same(f.grid())?;
            f.check_finite()?;
        }
        Ok(())
    }
}
