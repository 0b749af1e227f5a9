//! Uniform node-centred mesh on `[0, L]` with homogeneous Neumann ends.
//!
//! The discrete Laplacian reflects ghost nodes (`f[-1] = f[1]`,
//! `f[n] = f[n-2]`). Paired with trapezoidal weights this operator is
//! self-adjoint in the weighted inner product `<f, g> = sum w_i f_i g_i`,
//! which is what lets the eigen module work with symmetric tridiagonal
//! matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self { length, n, h: length / (n - 1) as f64 })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Position of node `i`. The last node is pinned to `L` exactly.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.length
        } else {
            i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoidal quadrature weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    /// Index of the node nearest to `x`.
    pub fn snap(&self, x: f64) -> usize {
        ((x / self.h).round().max(0.0) as usize).min(self.n - 1)
    }

    /// Trapezoidal rule applied to raw node values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let interior: f64 = values[1..self.n - 1].iter().sum();
        self.h * (interior + 0.5 * (values[0] + values[self.n - 1]))
    }

    /// Sub-grid on `(0, y')`, `y'` being `y` snapped to the nearest node.
    pub fn restrict(&self, y: f64) -> Result<Grid> {
        let j = self.restriction_index(y)?;
        if j + 1 == self.n {
            return Ok(*self);
        }
        Grid::new(self.x(j), j + 1)
    }

    /// Sub-grid on `(y', L)`, re-based so that its first node sits at 0.
    pub fn restrict_right(&self, y: f64) -> Result<Grid> {
        if !(y >= 0.0 && y < self.length) {
            return Err(Error::InvalidGrid(format!(
                "split point {y} outside [0, {})",
                self.length
            )));
        }
        let j = self.snap(y);
        if self.n - j < 3 {
            return Err(Error::InvalidGrid(format!("sub-interval ({y}, L) holds fewer than 3 nodes")));
        }
        if j == 0 {
            return Ok(*self);
        }
        Grid::new(self.length - self.x(j), self.n - j)
    }

    pub(crate) fn restriction_index(&self, y: f64) -> Result<usize> {
        if !(y > 0.0 && y <= self.length) {
            return Err(Error::InvalidGrid(format!("split point {y} outside (0, {}]", self.length)));
        }
        let j = self.snap(y);
        if j < 2 {
            return Err(Error::InvalidGrid(format!("sub-interval (0, {y}) holds fewer than 3 nodes")));
        }
        Ok(j)
    }
}

/// Node values of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness check; callers guarantee it.
    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64) -> f64) -> Self {
        Self { grid, values: (0..grid.len()).map(|i| f(grid.x(i))).collect() }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Spatial average `(1/|Ω|) ∫ f`.
    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.length()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.len(), other.len());
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Max-norm distance to another field on the same grid.
    pub fn distance_inf(&self, other: &ScalarField) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Node values restricted to the index range `[start, end)`, on `grid`.
    pub fn slice(&self, grid: Grid, start: usize) -> ScalarField {
        Self { grid, values: self.values[start..start + grid.len()].to_vec() }
    }
}

pub fn build_grid(length: f64, n: usize) -> Result<Grid> {
    Grid::new(length, n)
}

/// Trapezoidal quadrature `∫_0^L f dx`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.grid.integrate_values(&f.values)
}

/// `ℓ Δ_h f` with reflective ghost nodes.
pub fn apply_neumann_laplacian(ell: f64, f: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; f.len()];
    laplacian_into(&f.grid, ell, &f.values, &mut out);
    ScalarField::from_vec(f.grid, out)
}

/// Writes `ℓ Δ_h f` into `out`.
///
/// Computed from first differences, which are exact in floating point for
/// neighbouring values of similar size; this keeps the rounding floor of
/// residuals proportional to the curvature instead of to `|f| ℓ / h²`.
pub(crate) fn laplacian_into(grid: &Grid, ell: f64, f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let c = ell / (grid.spacing() * grid.spacing());
    out[0] = 2.0 * c * (f[1] - f[0]);
    for i in 1..n - 1 {
        out[i] = c * ((f[i + 1] - f[i]) - (f[i] - f[i - 1]));
    }
    out[n - 1] = 2.0 * c * (f[n - 2] - f[n - 1]);
}

/// Weighted gradient energy `∫ |f'|² dx` of the piecewise-linear interpolant.
pub(crate) fn gradient_energy(grid: &Grid, f: &[f64]) -> f64 {
    f.windows(2).map(|p| (p[1] - p[0]) * (p[1] - p[0])).sum::<f64>() / grid.spacing()
}
