//! Fixed-point solver built on the integral form of the kinetic equation.
//!
//! For a time-indexed field `v`, let `G(t) = m∫₀ᵗ e^{−(v_s∗φ)} ds`. The map
//!
//! ```text
//! (Φv)_t = e^{−G(t)}·u₀ + λ ∫₀ᵗ e^{−(G(t) − G(τ))} dτ
//! ```
//!
//! is increasing in `v` and a contraction on `[0, c]`-valued fields over a
//! window `T` with `λβmT²/2 + cβmT < 1`. Both time integrals use the
//! trapezoid rule on the stored mesh; the inner one is accumulated
//! recursively, which is algebraically identical to the direct sum.

use serde::Serialize;

use crate::convolution::Convolver;
use crate::equilibria::{equilibria, ModelParams, Regime};
use crate::error::{Error, Result};
use crate::grid::{DensityField, DomainGrid};
use crate::potential::Potential;

/// Nodes per contraction window.
pub const WINDOW_NODES: usize = 64;
/// Fewest nodes accepted by [`phi_map`].
pub const MIN_NODES: usize = 16;
const MAX_SWEEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeField {
    pub grid: DomainGrid,
    pub times: Vec<f64>,
    /// One field per time node.
    pub values: Vec<Vec<f64>>,
}

impl TimeField {
    /// `u` held constant on a uniform mesh of `nodes` points over `[t0, t0 + len]`.
    pub fn constant_in_time(u: &[f64], grid: &DomainGrid, t0: f64, len: f64, nodes: usize) -> Self {
        let times = (0..nodes).map(|k| t0 + len * k as f64 / (nodes - 1) as f64).collect();
        Self { grid: grid.clone(), times, values: vec![u.to_vec(); nodes] }
    }

    pub fn at(&self, k: usize) -> DensityField {
        DensityField::raw(self.grid.clone(), self.values[k].clone(), self.times[k])
    }

    /// Sup over time and space of `|self − other|`.
    pub fn sup_distance(&self, other: &TimeField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn apply_phi(conv: &Convolver, params: &ModelParams, v: &TimeField, u0: &[f64]) -> TimeField {
    let cells = u0.len();
    let (m, lambda) = (params.m, params.lambda);
    let mut scratch = vec![0.0; cells];
    let mut rate_prev = vec![0.0; cells];
    let mut rate = vec![0.0; cells];
    // Per cell: G_k, and I_k = ∫₀^{t_k} e^{−(G_k − G(τ))} dτ.
    let mut g = vec![0.0; cells];
    let mut inner = vec![0.0; cells];
    let mut out = Vec::with_capacity(v.times.len());

    conv.apply(&v.values[0], &mut scratch);
    for (r, c) in rate_prev.iter_mut().zip(&scratch) {
        *r = m * (-c).exp();
    }
    out.push(u0.to_vec());
    for k in 1..v.times.len() {
        let h = v.times[k] - v.times[k - 1];
        conv.apply(&v.values[k], &mut scratch);
        for (r, c) in rate.iter_mut().zip(&scratch) {
            *r = m * (-c).exp();
        }
        let mut next = vec![0.0; cells];
        for i in 0..cells {
            let dg = 0.5 * h * (rate_prev[i] + rate[i]);
            let decay = (-dg).exp();
            g[i] += dg;
            inner[i] = decay * inner[i] + 0.5 * h * (decay + 1.0);
            next[i] = (-g[i]).exp() * u0[i] + lambda * inner[i];
        }
        out.push(next);
        std::mem::swap(&mut rate, &mut rate_prev);
    }
    TimeField { grid: v.grid.clone(), times: v.times.clone(), values: out }
}

/// One application of `Φ` to `v` with initial datum `u0`.
pub fn phi_map(params: &ModelParams, p: &Potential, v: &TimeField, u0: &DensityField) -> Result<TimeField> {
    params.validate()?;
    if v.times.len() < MIN_NODES {
        return Err(Error::Resolution(format!(
            "time mesh has {} nodes, at least {MIN_NODES} are needed",
            v.times.len()
        )));
    }
    if !(v.times[v.times.len() - 1] > v.times[0]) {
        return Err(Error::Configuration("time mesh must span a positive window".into()));
    }
    if v.min() < 0.0 {
        return Err(Error::Domain("Φ is defined on nonnegative fields".into()));
    }
    let conv = Convolver::new(p, &v.grid)?;
    Ok(apply_phi(&conv, params, v, &u0.values))
}

/// Largest window with `λβmT²/2 + cβmT ≤ 1/2`.
pub fn contraction_window(params: &ModelParams, beta: f64, c: f64) -> f64 {
    let a = 0.5 * params.lambda * beta * params.m;
    let b = c * beta * params.m;
    if a == 0.0 && b == 0.0 {
        return f64::INFINITY;
    }
    if a == 0.0 {
        return 0.5 / b;
    }
    (-b + (b * b + 2.0 * a).sqrt()) / (2.0 * a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStats {
    pub start: f64,
    pub length: f64,
    pub sweeps: usize,
    /// Largest ratio of successive sup-changes (0 when fewer than two were
    /// above rounding level).
    pub max_ratio: f64,
    pub final_change: f64,
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub field: TimeField,
    pub windows: Vec<WindowStats>,
    /// Value of `λβmT²/2 + cβmT` for the window actually used.
    pub contraction_margin: f64,
}

impl PicardSolution {
    pub fn max_ratio(&self) -> f64 {
        self.windows.iter().map(|w| w.max_ratio).fold(0.0, f64::max)
    }
}

/// Iterates `Φ` to its fixed point window by window up to `t_end`.
pub fn solve_picard(
    params: &ModelParams,
    p: &Potential,
    u0: &DensityField,
    c: f64,
    tol: f64,
    t_end: f64,
) -> Result<PicardSolution> {
    params.validate()?;
    if !(t_end > 0.0 && tol > 0.0) {
        return Err(Error::Configuration("t_end and tol must be positive".into()));
    }
    let beta = p.beta();
    if beta > 0.0 {
        let eq = equilibria(params, beta)?;
        if eq.regime == Regime::Supercritical {
            return Err(Error::Configuration(format!("Picard solver needs λβ/m ≤ 1/e, got {}", eq.threshold)));
        }
        let (k1, k2) = (eq.kappa1.unwrap(), eq.kappa2.unwrap());
        if c < k1 * (1.0 - 1e-12) || c > k2 * (1.0 + 1e-12) {
            return Err(Error::Configuration(format!("bound c = {c} must lie in [κ₁, κ₂] = [{k1}, {k2}]")));
        }
    }
    if u0.min() < 0.0 || u0.max() > c * (1.0 + 1e-12) {
        return Err(Error::Configuration(format!(
            "initial data must satisfy 0 ≤ u₀ ≤ c = {c}, range is [{}, {}]",
            u0.min(),
            u0.max()
        )));
    }
    let conv = Convolver::new(p, &u0.grid)?;
    let t_max = contraction_window(params, beta, c);
    let windows = (t_end / t_max).ceil().max(1.0) as usize;
    let len = t_end / windows as f64;
    let margin = 0.5 * params.lambda * beta * params.m * len * len + c * beta * params.m * len;

    let mut start = u0.values.clone();
    let mut field = TimeField { grid: u0.grid.clone(), times: vec![u0.time], values: vec![start.clone()] };
    let mut stats = Vec::with_capacity(windows);
    let floor = 1e-13 * (1.0 + c);
    for w in 0..windows {
        let t0 = u0.time + w as f64 * len;
        let mut v = TimeField::constant_in_time(&start, &u0.grid, t0, len, WINDOW_NODES);
        let mut prev_change = f64::NAN;
        let mut max_ratio = 0.0f64;
        let mut sweeps = 0;
        let final_change = loop {
            let next = apply_phi(&conv, params, &v, &start);
            let change = next.sup_distance(&v);
            sweeps += 1;
            v = next;
            if prev_change > floor && change > floor {
                let ratio = change / prev_change;
                max_ratio = max_ratio.max(ratio);
                if ratio >= 1.0 {
                    return Err(Error::ContractionFailure { ratio, window_start: t0 });
                }
            }
            if change < tol {
                break change;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::ContractionFailure { ratio: max_ratio.max(1.0), window_start: t0 });
            }
            prev_change = change;
        };
        stats.push(WindowStats { start: t0, length: len, sweeps, max_ratio, final_change });
        start = v.values[WINDOW_NODES - 1].clone();
        field.times.extend_from_slice(&v.times[1..]);
        field.values.extend(v.values.into_iter().skip(1));
    }
    Ok(PicardSolution { field, windows: stats, contraction_margin: margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelParams, Potential, DomainGrid) {
        (
            ModelParams::new(1.0, 0.2, 1.0).unwrap(),
            Potential::indicator_box(1, 0.5, 1.0).unwrap(),
            DomainGrid::new(1, 8.0, 64, 0.0).unwrap(),
        )
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let (params, p, g) = setup();
        let k1 = equilibria(&params, 1.0).unwrap().kappa1.unwrap();
        let u0 = DensityField::constant(g.clone(), k1).unwrap();
        let v = TimeField::constant_in_time(&u0.values, &g, 0.0, 0.2, 64);
        let w = phi_map(&params, &p, &v, &u0).unwrap();
        // Trapezoid error of ∫e^{−r(t−τ)}dτ is O((rh)²).
        assert!(w.sup_distance(&v) < 1e-6, "{}", w.sup_distance(&v));
    }

    #[test]
    fn zero_kernel_closed_form() {
        let (params, p, g) = setup();
        let zero = DensityField::constant(g.clone(), 0.0).unwrap();
        let v = TimeField::constant_in_time(&zero.values, &g, 0.0, 1.0, 1025);
        let w = phi_map(&params, &p, &v, &zero).unwrap();
        for (t, vals) in w.times.iter().zip(&w.values) {
            // φ∗0 = 0, so Φ0 = (λ/m)(1 − e^{−mt}).
            let exact = 0.2 * (1.0 - (-t).exp());
            assert!(vals.iter().all(|x| (x - exact).abs() < 1e-7));
        }
    }

    #[test]
    fn coarse_mesh_rejected() {
        let (params, p, g) = setup();
        let u0 = DensityField::constant(g.clone(), 0.1).unwrap();
        let v = TimeField::constant_in_time(&u0.values, &g, 0.0, 1.0, 8);
        assert!(matches!(phi_map(&params, &p, &v, &u0), Err(Error::Resolution(_))));
    }

    #[test]
    fn window_satisfies_contraction_condition() {
        let params = ModelParams::new(1.0, 0.3, 1.0).unwrap();
        let t = contraction_window(&params, 1.0, 2.0);
        assert!((0.15 * t * t + 2.0 * t - 0.5).abs() < 1e-14);
    }

    #[test]
    fn picard_from_equilibrium_converges_at_once() {
        let (params, p, g) = setup();
        let k1 = equilibria(&params, 1.0).unwrap().kappa1.unwrap();
        let u0 = DensityField::constant(g, k1).unwrap();
        let sol = solve_picard(&params, &p, &u0, k1, 1e-5, 1.0).unwrap();
        assert!(sol.windows.iter().all(|w| w.sweeps == 1));
        assert!(sol.contraction_margin <= 0.5 + 1e-12);
    }

    #[test]
    fn picard_rejects_data_above_bound() {
        let (params, p, g) = setup();
        let u0 = DensityField::constant(g, 5.0).unwrap();
        assert!(matches!(solve_picard(&params, &p, &u0, 1.0, 1e-10, 1.0), Err(Error::Configuration(_))));
    }
}
