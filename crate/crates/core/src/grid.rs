//! Periodic grids and density fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Uniform periodic grid on `[origin, origin + L)^d` with `n` cells per axis.
/// Cell `i` has centre `origin + (i + ½)·pitch`; in 2-d cells are stored
/// row-major with the first axis slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainGrid {
    pub dim: usize,
    pub length: f64,
    pub n: usize,
    #[serde(default)]
    pub origin: f64,
}

impl DomainGrid {
    pub fn new(dim: usize, length: f64, n: usize, origin: f64) -> Result<Self> {
        let g = Self { dim, length, n, origin };
        g.validate()?;
        Ok(g)
    }

    /// Grid on `[−L/2, L/2)^d`.
    pub fn centered(dim: usize, length: f64, n: usize) -> Result<Self> {
        Self::new(dim, length, n, -0.5 * length)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::Configuration(format!("grid dimension {} not in {{1, 2}}", self.dim)));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::Configuration(format!("grid length {} must be positive", self.length)));
        }
        if !self.n.is_power_of_two() || self.n < 2 {
            return Err(Error::Configuration(format!("cells per axis {} must be a power of two", self.n)));
        }
        if !self.origin.is_finite() {
            return Err(Error::Configuration("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn pitch(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.pitch().powi(self.dim as i32)
    }

    /// Checks the resolution contract against a kernel: pitch at most
    /// `cutoff/4` and box length at least `4·cutoff`.
    pub fn check_resolution(&self, p: &Potential) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::Configuration(format!("potential is {}-d but grid is {}-d", p.dim(), self.dim)));
        }
        let r = p.cutoff_radius();
        if self.pitch() > r / 4.0 * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!("grid pitch {} exceeds cutoff/4 = {}", self.pitch(), r / 4.0)));
        }
        if self.length < 4.0 * r * (1.0 - 1e-12) {
            return Err(Error::Resolution(format!("box length {} is below 4·cutoff = {}", self.length, 4.0 * r)));
        }
        Ok(())
    }

    pub fn axis_center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.pitch()
    }

    /// Per-axis indices of a flat cell index.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        if self.dim == 1 {
            ij[0]
        } else {
            ij[0] * self.n + ij[1]
        }
    }

    /// Centre of a flat cell index.
    pub fn center(&self, idx: usize) -> Vec<f64> {
        let ij = self.unflatten(idx);
        (0..self.dim).map(|a| self.axis_center(ij[a])).collect()
    }

    /// Flat index of the cell containing `x` (coordinates wrapped into the box).
    pub fn locate(&self, x: &[f64]) -> usize {
        let mut ij = [0usize; 2];
        for a in 0..self.dim {
            let s = (x[a] - self.origin).rem_euclid(self.length) / self.pitch();
            ij[a] = (s.floor() as usize).min(self.n - 1);
        }
        self.flatten(ij)
    }

    /// Flat index of the cell nearest to `x` along each axis (no wrapping),
    /// or `None` if `x` lies outside the box.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let mut ij = [0usize; 2];
        for a in 0..self.dim {
            let s = (x[a] - self.origin) / self.pitch();
            if !(0.0..self.n as f64).contains(&s) {
                return None;
            }
            ij[a] = (s.floor() as usize).min(self.n - 1);
        }
        Some(self.flatten(ij))
    }
}

/// Nonnegative density sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: DomainGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityField {
    /// Checked constructor: values must be finite and nonnegative.
    pub fn new(grid: DomainGrid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::Configuration(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("density value {v} at cell {i} is negative or not finite")));
        }
        Ok(Self { grid, values, time })
    }

    /// Solver output: finite but possibly marginally negative values, which
    /// the solvers monitor rather than clamp.
    pub(crate) fn raw(grid: DomainGrid, values: Vec<f64>, time: f64) -> Self {
        Self { grid, values, time }
    }

    pub fn constant(grid: DomainGrid, c: f64) -> Result<Self> {
        let n = grid.cells();
        Self::new(grid, vec![c; n], 0.0)
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: DomainGrid, f: F) -> Result<Self> {
        let values = (0..grid.cells()).map(|i| f(&grid.center(i))).collect();
        Self::new(grid, values, 0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_distance(&self, other: &DensityField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Integral over the box.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Cyclic shift by `k` cells along the first axis.
    pub fn translated(&self, k: isize) -> DensityField {
        let n = self.grid.n as isize;
        let mut out = vec![0.0; self.values.len()];
        for (idx, v) in self.values.iter().enumerate() {
            let ij = self.grid.unflatten(idx);
            let i = ((ij[0] as isize + k).rem_euclid(n)) as usize;
            out[self.grid.flatten([i, ij[1]])] = *v;
        }
        DensityField::raw(self.grid.clone(), out, self.time)
    }
}
