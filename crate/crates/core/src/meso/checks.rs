//! Regulation-regime diagnostics: boundedness, comparison and stability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Kinetic;
use crate::equilibria::{equilibria, EquilibriumPair, ModelParams, Regime};
use crate::error::{Error, Result};
use crate::grid::{DensityField, DomainGrid};
use crate::potential::Potential;
use crate::report::{Check, Report};

/// Slack on the invariant bounds `κ₁ ≤ u ≤ c ≤ κ₂`.
pub const BOUND_TOL: f64 = 1e-6;
/// Slack on pointwise ordering in the comparison check.
pub const ORDER_TOL: f64 = 1e-6;

fn subcritical_pair(params: &ModelParams, beta: f64) -> Result<EquilibriumPair> {
    if !(beta > 0.0) {
        return Err(Error::Configuration("regulation checks need β > 0".into()));
    }
    let eq = equilibria(params, beta)?;
    if eq.regime == Regime::Supercritical {
        return Err(Error::Configuration(format!(
            "regulation regime needs λ ≤ m/(βe); λβ/m = {} exceeds 1/e",
            eq.threshold
        )));
    }
    Ok(eq)
}

/// Runs method of lines from `u0 ∈ [0, κ₂]` and checks `max u_t ≤ κ₂`. When
/// `invariant_c` is given and `κ₁ ≤ u₀ ≤ c`, also checks `κ₁ ≤ u_t ≤ c`.
pub fn check_bounded_regime(
    params: &ModelParams,
    p: &Potential,
    u0: &DensityField,
    t_end: f64,
    invariant_c: Option<f64>,
) -> Result<Report> {
    let eq = subcritical_pair(params, p.beta())?;
    let (k1, k2) = (eq.kappa1.unwrap(), eq.kappa2.unwrap());
    if u0.min() < 0.0 || u0.max() > k2 {
        return Err(Error::Configuration(format!(
            "initial data must satisfy 0 ≤ u₀ ≤ κ₂ = {k2}, range is [{}, {}]",
            u0.min(),
            u0.max()
        )));
    }
    let model = Kinetic::new(params, p, &u0.grid)?;
    let dt = model.default_dt();
    let mut rk = model.stepper();
    let mut u = u0.values.clone();
    let (mut lo, mut hi) = (u0.min(), u0.max());
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    for s in 0..steps {
        rk.step(&mut u, u0.time + s as f64 * h, h)?;
        for &x in &u {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let mut report = Report::default();
    report.push(Check::at_most("max u_t ≤ κ₂", hi, k2 + BOUND_TOL));
    report.push(Check::at_least("min u_t ≥ 0", lo, -super::POSITIVITY_TOL));
    if let Some(c) = invariant_c {
        if !(c >= k1 && c <= k2) {
            return Err(Error::Configuration(format!("invariant bound c = {c} must lie in [κ₁, κ₂]")));
        }
        if u0.min() >= k1 && u0.max() <= c {
            report.push(Check::at_least("u_t ≥ κ₁ on [κ₁, c]", lo, k1 - BOUND_TOL));
            report.push(Check::at_most("u_t ≤ c on [κ₁, c]", hi, c + BOUND_TOL));
        }
    }
    Ok(report)
}

/// Co-integrates two ordered initial fields and checks the order persists at
/// every step.
pub fn check_comparison(
    params: &ModelParams,
    p: &Potential,
    low: &DensityField,
    high: &DensityField,
    t_end: f64,
) -> Result<Report> {
    let eq = subcritical_pair(params, p.beta())?;
    let k2 = eq.kappa2.unwrap();
    if low.grid != high.grid {
        return Err(Error::Configuration("comparison fields live on different grids".into()));
    }
    let ordered = low.values.iter().zip(&high.values).all(|(a, b)| *a >= 0.0 && a <= b && *b <= k2);
    if !ordered {
        return Err(Error::Configuration("comparison needs 0 ≤ u_low ≤ u_high ≤ κ₂ pointwise".into()));
    }
    let model = Kinetic::new(params, p, &low.grid)?;
    let dt = model.default_dt();
    let (mut a, mut b) = (low.values.clone(), high.values.clone());
    let (mut ra, mut rb) = (model.stepper(), model.stepper());
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let mut worst = f64::NEG_INFINITY;
    for s in 0..steps {
        let t = low.time + s as f64 * h;
        ra.step(&mut a, t, h)?;
        rb.step(&mut b, t, h)?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max(x - y);
        }
    }
    let mut report = Report::default();
    report.push(Check::at_most("max (u_low − u_high)", worst, ORDER_TOL));
    Ok(report)
}

/// Zero-mean smooth field with sup norm 1: a few random Fourier modes.
pub fn random_smooth_field(grid: &DomainGrid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(1..=4) as f64,
                rng.random_range(0..=4) as f64,
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let k0 = std::f64::consts::TAU / grid.length;
    let mut f: Vec<f64> = (0..grid.cells())
        .map(|idx| {
            let x = grid.center(idx);
            modes
                .iter()
                .map(|&(kx, ky, amp, phase)| {
                    let arg = kx * k0 * x[0] + if grid.dim == 2 { ky * k0 * x[1] } else { 0.0 };
                    amp * (arg + phase).cos()
                })
                .sum()
        })
        .collect();
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    f.iter_mut().for_each(|v| *v -= mean);
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup > 0.0 {
        f.iter_mut().for_each(|v| *v /= sup);
    }
    f
}

/// Default stability horizon `50 / (m·e^{−βκ₁})`.
pub fn stability_horizon(params: &ModelParams, beta: f64, k1: f64) -> f64 {
    50.0 / (params.m * (-beta * k1).exp())
}

#[derive(Debug, Clone)]
pub struct StabilityRun {
    pub report: Report,
    pub initial_deviation: f64,
    pub final_deviation: f64,
    /// `(t, ‖u_t − κ₁‖∞)` at every step.
    pub deviations: Vec<(f64, f64)>,
}

/// Evolves `κ₁ + δ(x)` and tracks `‖u_t − κ₁‖∞`.
pub fn stability_run(
    params: &ModelParams,
    p: &Potential,
    grid: &DomainGrid,
    perturbation: &[f64],
    t_end: f64,
) -> Result<StabilityRun> {
    let eq = subcritical_pair(params, p.beta())?;
    if eq.regime != Regime::Subcritical {
        return Err(Error::Configuration("stability check needs the subcritical regime".into()));
    }
    let k1 = eq.kappa1.unwrap();
    let model = Kinetic::new(params, p, grid)?;
    let mut u: Vec<f64> = perturbation.iter().map(|d| k1 + d).collect();
    let dev = |u: &[f64]| u.iter().fold(0.0f64, |m, v| m.max((v - k1).abs()));
    let initial = dev(&u);
    let dt = model.default_dt();
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let mut rk = model.stepper();
    let mut deviations = Vec::with_capacity(steps + 1);
    deviations.push((0.0, initial));
    let mut worst = initial;
    for s in 0..steps {
        rk.step(&mut u, s as f64 * h, h)?;
        let d = dev(&u);
        worst = worst.max(d);
        deviations.push(((s + 1) as f64 * h, d));
    }
    let last = deviations.last().unwrap().1;
    let mut report = Report::default();
    report.push(Check::at_most("max deviation ≤ 2 × initial", worst, 2.0 * initial));
    report.push(Check::at_most("final deviation ≤ 0.1 × initial", last, 0.1 * initial));
    Ok(StabilityRun { report, initial_deviation: initial, final_deviation: last, deviations })
}

/// Perturbs `κ₁` by `amplitude` times a random smooth zero-mean field and
/// checks the deviation stays within twice its initial size and decays below
/// 10% of it by `t_end` (default [`stability_horizon`]).
pub fn check_stability(
    params: &ModelParams,
    p: &Potential,
    grid: &DomainGrid,
    amplitude: f64,
    seed: u64,
    t_end: Option<f64>,
) -> Result<StabilityRun> {
    let beta = p.beta();
    let eq = subcritical_pair(params, beta)?;
    let k1 = eq.kappa1.unwrap();
    if !(amplitude >= 0.0 && amplitude <= 0.1 * k1) {
        return Err(Error::Configuration(format!(
            "perturbation amplitude {amplitude} must lie in [0, 0.1·κ₁ = {}]",
            0.1 * k1
        )));
    }
    let shape = random_smooth_field(grid, seed);
    let delta: Vec<f64> = shape.iter().map(|s| amplitude * s).collect();
    let horizon = t_end.unwrap_or_else(|| stability_horizon(params, beta, k1));
    let mut run = stability_run(params, p, grid, &delta, horizon)?;
    if amplitude == 0.0 {
        run.report = Report::default();
        run.report.push(Check::at_most(
            "deviation stays 0",
            run.deviations.iter().map(|d| d.1).fold(0.0, f64::max),
            0.0,
        ));
    }
    Ok(run)
}
