//! Particle configurations on a torus with a cell list and cached energies.

use crate::error::{Error, Result};
use crate::potential::Potential;

pub type Point = [f64; 2];

/// Finite point set on `[origin, origin + L)^d` carrying, for every particle,
/// its interaction energy `E_i = Σ_{j≠i} φ(x_i − x_j)` under the minimum-image
/// convention. Cells are at least one cutoff wide, so every interacting pair
/// sits in the same or adjacent cells.
#[derive(Debug, Clone)]
pub struct ParticleConfiguration {
    potential: Potential,
    dim: usize,
    length: f64,
    origin: f64,
    ncell: usize,
    cell_size: f64,
    pos: Vec<Point>,
    energy: Vec<f64>,
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
    slot: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

impl ParticleConfiguration {
    pub fn new(potential: &Potential, length: f64, origin: f64) -> Result<Self> {
        let dim = potential.dim();
        let r = potential.cutoff_radius();
        if !(length > 2.0 * r) {
            return Err(Error::Configuration(format!("torus length {length} must exceed twice the cutoff {r}")));
        }
        let ncell = ((length / r).floor() as usize).clamp(1, 1 << 12);
        let total = ncell.pow(dim as u32);
        if total > 1 << 24 {
            return Err(Error::Capacity(format!("cell list with {total} cells is too large")));
        }
        let mut cfg = Self {
            potential: potential.clone(),
            dim,
            length,
            origin,
            ncell,
            cell_size: length / ncell as f64,
            pos: Vec::new(),
            energy: Vec::new(),
            cells: vec![Vec::new(); total],
            cell_of: Vec::new(),
            slot: Vec::new(),
            neighbors: Vec::with_capacity(total),
        };
        for c in 0..total {
            let nb = cfg.neighbor_cells(c);
            cfg.neighbors.push(nb);
        }
        Ok(cfg)
    }

    fn neighbor_cells(&self, c: usize) -> Vec<usize> {
        let n = self.ncell as isize;
        let (ci, cj) = if self.dim == 1 { (c as isize, 0) } else { (c as isize / n, c as isize % n) };
        let mut out = Vec::new();
        let span_j: &[isize] = if self.dim == 1 { &[0] } else { &[-1, 0, 1] };
        for di in [-1isize, 0, 1] {
            for &dj in span_j {
                let a = (ci + di).rem_euclid(n);
                let b = (cj + dj).rem_euclid(n);
                let idx = if self.dim == 1 { a } else { a * n + b } as usize;
                if !out.contains(&idx) {
                    out.push(idx);
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.pos
    }

    pub fn energies(&self) -> &[f64] {
        &self.energy
    }

    pub fn wrap(&self, x: Point) -> Point {
        let mut y = [0.0; 2];
        for a in 0..self.dim {
            let mut v = self.origin + (x[a] - self.origin).rem_euclid(self.length);
            if v >= self.origin + self.length {
                v = self.origin;
            }
            y[a] = v;
        }
        y
    }

    /// Minimum-image displacement `a − b`.
    pub fn displacement(&self, a: &Point, b: &Point) -> Point {
        let mut d = [0.0; 2];
        for k in 0..self.dim {
            let v = a[k] - b[k];
            d[k] = v - self.length * (v / self.length).round();
        }
        d
    }

    /// `φ_per(a − b)`.
    pub fn pair_potential(&self, a: &Point, b: &Point) -> f64 {
        let d = self.displacement(a, b);
        self.potential.value(&d[..self.dim])
    }

    fn cell_index(&self, x: &Point) -> usize {
        let mut idx = 0;
        for a in 0..self.dim {
            let s = ((x[a] - self.origin) / self.cell_size).floor() as usize;
            idx = idx * self.ncell + s.min(self.ncell - 1);
        }
        idx
    }

    /// `E^φ(x, γ)`, excluding particle `skip` if given.
    pub fn energy_at(&self, x: &Point, skip: Option<usize>) -> f64 {
        let mut e = 0.0;
        for &c in &self.neighbors[self.cell_index(x)] {
            for &j in &self.cells[c] {
                if Some(j) != skip {
                    e += self.pair_potential(x, &self.pos[j]);
                }
            }
        }
        e
    }

    /// Inserts `x` (wrapped into the box) and returns its index together with
    /// the indices of particles whose energy changed.
    pub fn insert(&mut self, x: Point) -> (usize, Vec<usize>) {
        let x = self.wrap(x);
        let c = self.cell_index(&x);
        let mut e = 0.0;
        let mut touched = Vec::new();
        for k in 0..self.neighbors[c].len() {
            let nc = self.neighbors[c][k];
            for s in 0..self.cells[nc].len() {
                let j = self.cells[nc][s];
                let v = self.pair_potential(&x, &self.pos[j]);
                if v != 0.0 {
                    e += v;
                    self.energy[j] += v;
                    touched.push(j);
                }
            }
        }
        let i = self.pos.len();
        self.pos.push(x);
        self.energy.push(e);
        self.cell_of.push(c);
        self.slot.push(self.cells[c].len());
        self.cells[c].push(i);
        (i, touched)
    }

    /// Removes particle `i`. The last particle takes index `i`, as in
    /// `Vec::swap_remove`; returned indices refer to the state after removal.
    pub fn remove(&mut self, i: usize) -> Vec<usize> {
        let x = self.pos[i];
        let c = self.cell_of[i];
        let mut touched = Vec::new();
        for k in 0..self.neighbors[c].len() {
            let nc = self.neighbors[c][k];
            for s in 0..self.cells[nc].len() {
                let j = self.cells[nc][s];
                if j == i {
                    continue;
                }
                let v = self.pair_potential(&x, &self.pos[j]);
                if v != 0.0 {
                    self.energy[j] -= v;
                    touched.push(j);
                }
            }
        }
        // Unlink i from its cell.
        let s = self.slot[i];
        self.cells[c].swap_remove(s);
        if s < self.cells[c].len() {
            let moved = self.cells[c][s];
            self.slot[moved] = s;
        }
        // Move the last particle into slot i.
        let last = self.pos.len() - 1;
        if i != last {
            let lc = self.cell_of[last];
            let ls = self.slot[last];
            self.cells[lc][ls] = i;
        }
        self.pos.swap_remove(i);
        self.energy.swap_remove(i);
        self.cell_of.swap_remove(i);
        self.slot.swap_remove(i);
        for t in &mut touched {
            if *t == last {
                *t = i;
            }
        }
        touched
    }

    /// Energies recomputed by a direct double loop.
    pub fn recompute_energies(&self) -> Vec<f64> {
        let n = self.pos.len();
        let mut e = vec![0.0; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.pair_potential(&self.pos[i], &self.pos[j]);
                e[i] += v;
                e[j] += v;
            }
        }
        e
    }

    /// Largest `|cached − recomputed| / max(1, |recomputed|)`.
    pub fn audit(&self) -> f64 {
        self.recompute_energies()
            .iter()
            .zip(&self.energy)
            .map(|(r, c)| (r - c).abs() / r.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Overwrites the cache with recomputed energies.
    pub fn refresh_energies(&mut self) {
        self.energy = self.recompute_energies();
    }

    /// Number of particles inside the box `[lo, hi]` (per-axis, no wrapping).
    pub fn count_in(&self, lo: &[f64], hi: &[f64]) -> usize {
        self.pos.iter().filter(|p| (0..self.dim).all(|a| p[a] >= lo[a] && p[a] <= hi[a])).count()
    }
}
