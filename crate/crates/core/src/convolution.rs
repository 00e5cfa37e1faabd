//! Periodic convolution `φ∗u` on a [`DomainGrid`].
//!
//! The kernel is discretized by cell integrals `w_j = ∫_{cell j} φ`, so the
//! weights sum to `β` exactly and a constant field maps to `c·β`. Two
//! independent evaluation paths are provided: a direct sum over the kernel
//! footprint and a spectral product through `rustfft`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{DensityField, DomainGrid};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    Direct,
    Fft,
    /// Whichever of the two is cheaper for the stencil size.
    Auto,
}

pub struct Convolver {
    grid: DomainGrid,
    /// Nonzero stencil entries `(offset along axis 0, offset along axis 1, w)`.
    stencil: Vec<(isize, isize, f64)>,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    prefer_fft: bool,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("grid", &self.grid)
            .field("stencil_len", &self.stencil.len())
            .field("prefer_fft", &self.prefer_fft)
            .finish()
    }
}

impl Convolver {
    pub fn new(p: &Potential, grid: &DomainGrid) -> Result<Self> {
        grid.validate()?;
        grid.check_resolution(p)?;
        let h = grid.pitch();
        let n = grid.n;
        let reach = (p.cutoff_radius() / h + 0.5).ceil() as isize;
        if 2 * reach as usize + 1 > n {
            return Err(Error::Resolution(format!(
                "kernel footprint of {} cells does not fit in {} cells",
                2 * reach + 1,
                n
            )));
        }
        let edge = |j: isize| ((j as f64 - 0.5) * h, (j as f64 + 0.5) * h);
        let mut stencil = Vec::new();
        if grid.dim == 1 {
            for j in -reach..=reach {
                let (lo, hi) = edge(j);
                let w = p.mass_1d(lo, hi);
                if w != 0.0 {
                    stencil.push((j, 0, w));
                }
            }
        } else {
            for j in -reach..=reach {
                for k in -reach..=reach {
                    let w = p.mass_2d(edge(j), edge(k));
                    if w != 0.0 {
                        stencil.push((j, k, w));
                    }
                }
            }
        }

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut spectrum = vec![Complex::new(0.0, 0.0); grid.cells()];
        let wrap = |j: isize| j.rem_euclid(n as isize) as usize;
        for &(j, k, w) in &stencil {
            spectrum[grid.flatten([wrap(j), wrap(k)])].re += w;
        }
        fft_nd(&forward, grid, &mut spectrum);

        let cells = grid.cells() as f64;
        let direct_cost = cells * stencil.len() as f64;
        let fft_cost = 10.0 * cells * (cells.log2() + 1.0);
        Ok(Self { grid: grid.clone(), stencil, spectrum, forward, inverse, prefer_fft: fft_cost < direct_cost })
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    /// Sum of the discrete weights (equals `β` up to rounding).
    pub fn weight_sum(&self) -> f64 {
        self.stencil.iter().map(|s| s.2).sum()
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.apply_with(Path::Auto, u, out)
    }

    pub fn apply_with(&self, path: Path, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.grid.cells());
        assert_eq!(out.len(), self.grid.cells());
        let use_fft = match path {
            Path::Direct => false,
            Path::Fft => true,
            Path::Auto => self.prefer_fft,
        };
        if use_fft {
            self.apply_fft(u, out)
        } else {
            self.apply_direct(u, out)
        }
    }

    fn apply_direct(&self, u: &[f64], out: &mut [f64]) {
        let n = self.grid.n as isize;
        if self.grid.dim == 1 {
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for &(j, _, w) in &self.stencil {
                    acc += w * u[(i as isize - j).rem_euclid(n) as usize];
                }
                *o = acc;
            }
        } else {
            for (idx, o) in out.iter_mut().enumerate() {
                let ij = self.grid.unflatten(idx);
                let mut acc = 0.0;
                for &(j, k, w) in &self.stencil {
                    let a = (ij[0] as isize - j).rem_euclid(n) as usize;
                    let b = (ij[1] as isize - k).rem_euclid(n) as usize;
                    acc += w * u[a * self.grid.n + b];
                }
                *o = acc;
            }
        }
    }

    fn apply_fft(&self, u: &[f64], out: &mut [f64]) {
        let mut buf: Vec<Complex<f64>> = u.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft_nd(&self.forward, &self.grid, &mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        fft_nd(&self.inverse, &self.grid, &mut buf);
        let scale = 1.0 / self.grid.cells() as f64;
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
    }

    pub fn convolve(&self, u: &DensityField) -> DensityField {
        let mut out = vec![0.0; u.values.len()];
        self.apply(&u.values, &mut out);
        DensityField::raw(u.grid.clone(), out, u.time)
    }
}

/// In-place transform along every axis of a row-major buffer.
fn fft_nd(plan: &Arc<dyn Fft<f64>>, grid: &DomainGrid, buf: &mut [Complex<f64>]) {
    let n = grid.n;
    plan.process(buf);
    if grid.dim == 2 {
        let mut column = vec![Complex::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                column[r] = buf[r * n + c];
            }
            plan.process(&mut column);
            for r in 0..n {
                buf[r * n + c] = column[r];
            }
        }
    }
}

/// One-shot `φ∗u` on the field's own grid.
pub fn convolve(p: &Potential, u: &DensityField) -> Result<DensityField> {
    Ok(Convolver::new(p, &u.grid)?.convolve(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (Potential, DomainGrid) {
        (Potential::indicator_box(1, 0.5, 1.0).unwrap(), DomainGrid::new(1, 8.0, n, 0.0).unwrap())
    }

    #[test]
    fn constant_maps_to_c_beta() {
        let (p, g) = setup(64);
        let u = DensityField::constant(g, 0.7).unwrap();
        let v = convolve(&p, &u).unwrap();
        for x in &v.values {
            assert!((x - 0.7).abs() < 1e-13);
        }
    }

    #[test]
    fn hot_cell_reproduces_kernel() {
        let p = Potential::triangle(1, 1.0, 1.0).unwrap();
        let g = DomainGrid::new(1, 8.0, 256, 0.0).unwrap();
        let h = g.pitch();
        let mut vals = vec![0.0; 256];
        vals[100] = 1.0 / h;
        let u = DensityField::new(g.clone(), vals, 0.0).unwrap();
        let v = convolve(&p, &u).unwrap();
        for i in 0..256 {
            let off = (i as f64 - 100.0) * h;
            assert!((v.values[i] - p.value(&[off])).abs() < h, "{i}");
        }
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let p = Potential::zero(1, 0.5).unwrap();
        let g = DomainGrid::new(1, 8.0, 64, 0.0).unwrap();
        let u = DensityField::constant(g, 3.0).unwrap();
        assert!(convolve(&p, &u).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn coarse_grid_is_resolution_error() {
        let (p, g) = setup(8);
        let u = DensityField::constant(g, 1.0).unwrap();
        assert!(matches!(convolve(&p, &u), Err(Error::Resolution(_))));
    }

    #[test]
    fn paths_agree_in_two_dimensions() {
        let p = Potential::triangle(2, 1.0, 1.0).unwrap();
        let g = DomainGrid::new(2, 8.0, 32, 0.0).unwrap();
        let c = Convolver::new(&p, &g).unwrap();
        assert!((c.weight_sum() - p.beta()).abs() < 1e-6);
        let u: Vec<f64> = (0..g.cells()).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let (mut a, mut b) = (vec![0.0; u.len()], vec![0.0; u.len()]);
        c.apply_with(Path::Direct, &u, &mut a);
        c.apply_with(Path::Fft, &u, &mut b);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * scale);
        }
    }
}
