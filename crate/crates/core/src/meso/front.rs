//! Front detection for the aggregation regime (one space dimension).
//!
//! Two arrival times are recorded per probe: the first time `u(x, t)` reaches
//! the level `b` (linear interpolation in time between steps), and the first
//! reporting time from which `u̇(x, ·) ≥ v(b, κ)` holds for a full reporting
//! interval. `u̇` is evaluated from the right-hand side, not differenced.

use std::path::Path;

use serde::Serialize;

use super::Kinetic;
use crate::equilibria::{AggregationCertificate, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{DensityField, DomainGrid};
use crate::io::{fmt_f64, write_csv};
use crate::potential::Potential;
use crate::report::{Check, Report};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSample {
    pub t: f64,
    pub udot_min: f64,
    pub udot_max: f64,
    pub u_min: f64,
    pub u_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontTrace {
    pub probes: Vec<f64>,
    pub level: f64,
    pub t_level: Vec<Option<f64>>,
    pub t_speed: Vec<Option<f64>>,
    /// `u` and `u̇` ranges over the cells of the certificate region at every
    /// reporting time.
    pub growth: Vec<GrowthSample>,
    pub t_final: f64,
}

/// Periodic linear interpolation of cell-centred values at `x`.
pub fn interpolate(grid: &DomainGrid, u: &[f64], x: f64) -> f64 {
    let h = grid.pitch();
    let s = (x - grid.origin) / h - 0.5;
    let i = s.floor();
    let w = s - i;
    let n = grid.n as isize;
    let a = (i as isize).rem_euclid(n) as usize;
    let b = (i as isize + 1).rem_euclid(n) as usize;
    u[a] * (1.0 - w) + u[b] * w
}

/// Integrates from `u0` and records arrival times at `probes` together with
/// the growth envelope on the certificate region.
pub fn front_trace(
    params: &ModelParams,
    p: &Potential,
    u0: &DensityField,
    cert: &AggregationCertificate,
    probes: &[f64],
    t_end: f64,
    report_every: f64,
) -> Result<FrontTrace> {
    if !cert.valid {
        return Err(Error::Configuration(format!(
            "front tracing needs a valid certificate: {}",
            cert.violation.as_deref().unwrap_or("invalid")
        )));
    }
    let grid = &u0.grid;
    if grid.dim != 1 || cert.region.dim() != 1 {
        return Err(Error::Configuration("front tracing is implemented for d = 1".into()));
    }
    if !(t_end > 0.0 && report_every > 0.0) {
        return Err(Error::Configuration("t_end and report_every must be positive".into()));
    }
    let region_cells: Vec<usize> = (0..grid.cells()).filter(|&i| cert.region.contains(&grid.center(i))).collect();
    if region_cells.is_empty() {
        return Err(Error::Configuration("certificate region contains no grid cell".into()));
    }
    let (b, kb) = (cert.b, cert.kappa * cert.b);
    if let Some(&i) = region_cells.iter().find(|&&i| !(u0.values[i] > b && u0.values[i] < kb)) {
        return Err(Error::Configuration(format!(
            "initial data must satisfy b < u0 < κ·b on the region (b = {b}, κ·b = {kb}); u0 = {} at x = {}",
            u0.values[i],
            grid.center(i)[0]
        )));
    }
    let (lo, hi) = (grid.origin + 0.25 * grid.length, grid.origin + 0.75 * grid.length);
    if let Some(x) = probes.iter().find(|&&x| x < lo || x > hi) {
        return Err(Error::Configuration(format!("probe {x} lies within L/4 of the periodic boundary [{lo}, {hi}]")));
    }

    let model = Kinetic::new(params, p, grid)?;
    let dt = model.default_dt();
    let mut rk = model.stepper();
    let mut u = u0.values.clone();
    let mut t = u0.time;
    let n = probes.len();
    let mut t_level = vec![None; n];
    let mut t_speed: Vec<Option<f64>> = vec![None; n];
    let mut candidate: Vec<Option<f64>> = vec![None; n];
    let mut prev_probe: Vec<f64> = probes.iter().map(|&x| interpolate(grid, &u, x)).collect();
    for (k, v) in prev_probe.iter().enumerate() {
        if *v >= b {
            t_level[k] = Some(t);
        }
    }
    let mut growth = Vec::new();

    let mut sample = |u: &[f64], t: f64, t_speed: &mut Vec<Option<f64>>, candidate: &mut Vec<Option<f64>>| {
        let udot = model.rhs(u);
        let mut g = GrowthSample {
            t,
            udot_min: f64::INFINITY,
            udot_max: f64::NEG_INFINITY,
            u_min: f64::INFINITY,
            u_max: f64::NEG_INFINITY,
        };
        for &i in &region_cells {
            g.udot_min = g.udot_min.min(udot[i]);
            g.udot_max = g.udot_max.max(udot[i]);
            g.u_min = g.u_min.min(u[i]);
            g.u_max = g.u_max.max(u[i]);
        }
        growth.push(g);
        for (k, &x) in probes.iter().enumerate() {
            if t_speed[k].is_some() {
                continue;
            }
            if interpolate(grid, &udot, x) >= cert.v {
                match candidate[k] {
                    Some(t0) => t_speed[k] = Some(t0),
                    None => candidate[k] = Some(t),
                }
            } else {
                candidate[k] = None;
            }
        }
    };
    sample(&u, t, &mut t_speed, &mut candidate);

    let mut r = 1usize;
    while t < t_end {
        let target = (u0.time + r as f64 * report_every).min(t_end);
        let steps = ((target - t) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = (target - t) / steps as f64;
        let t0 = t;
        for s in 0..steps {
            rk.step(&mut u, t0 + s as f64 * h, h)?;
            let ts = t0 + (s + 1) as f64 * h;
            for (k, &x) in probes.iter().enumerate() {
                let v = interpolate(grid, &u, x);
                if t_level[k].is_none() && v >= b {
                    let frac = (b - prev_probe[k]) / (v - prev_probe[k]);
                    t_level[k] = Some(ts - h + frac.clamp(0.0, 1.0) * h);
                }
                prev_probe[k] = v;
            }
        }
        t = target;
        sample(&u, t, &mut t_speed, &mut candidate);
        r += 1;
        if n > 0 && t_level.iter().all(Option::is_some) && t_speed.iter().all(Option::is_some) {
            break;
        }
    }
    Ok(FrontTrace { probes: probes.to_vec(), level: b, t_level, t_speed, growth, t_final: t })
}

impl FrontTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let rows =
            (0..self.probes.len()).map(|k| vec![fmt_f64(self.probes[k]), opt(self.t_level[k]), opt(self.t_speed[k])]);
        write_csv(path, &["x", "t_level", "t_speed"], rows)
    }

    /// Growth envelope on the region: `λ/κ < u̇ ≤ λ` and
    /// `b + (λ/κ)t < u < κb + λt`, each with slack `1e−6·(1 + λt)`, through
    /// `horizon`.
    pub fn growth_report(&self, params: &ModelParams, cert: &AggregationCertificate, horizon: f64) -> Report {
        let (lambda, kappa, b) = (params.lambda, cert.kappa, cert.b);
        let t0 = self.growth.first().map(|g| g.t).unwrap_or(0.0);
        let mut worst = [f64::NEG_INFINITY; 4];
        for g in self.growth.iter().filter(|g| g.t <= horizon) {
            let s = g.t - t0;
            let tol = 1e-6 * (1.0 + lambda * s);
            // Each entry is (violation amount − tolerance); ≤ 0 is a pass.
            worst[0] = worst[0].max(lambda / kappa - g.udot_min - tol);
            worst[1] = worst[1].max(g.udot_max - lambda - tol);
            worst[2] = worst[2].max(b + lambda / kappa * s - g.u_min - tol);
            worst[3] = worst[3].max(g.u_max - (kappa * b + lambda * s) - tol);
        }
        let mut report = Report::default();
        report.push(Check::at_most("u̇ > λ/κ on A", worst[0], 0.0));
        report.push(Check::at_most("u̇ ≤ λ on A", worst[1], 0.0));
        report.push(Check::at_most("u > b + (λ/κ)t on A", worst[2], 0.0));
        report.push(Check::at_most("u < κb + λt on A", worst[3], 0.0));
        report.push(Check::at_least(
            "growth samples through horizon",
            self.growth.last().map(|g| g.t - t0).unwrap_or(0.0),
            horizon - t0 - 1e-9,
        ));
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::certificate_with_phi;
    use crate::potential::RegionSupport;

    #[test]
    fn interpolation_hits_centres_and_wraps() {
        let g = DomainGrid::new(1, 4.0, 4, 0.0).unwrap();
        let u = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(interpolate(&g, &u, 0.5), 1.0);
        assert_eq!(interpolate(&g, &u, 1.0), 1.5);
        assert_eq!(interpolate(&g, &u, 3.75), 3.25);
        assert_eq!(interpolate(&g, &u, 0.25), 1.75);
    }

    #[test]
    fn refuses_initial_data_outside_band() {
        let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let p = Potential::indicator_box(1, 0.5, 1.0).unwrap();
        let g = DomainGrid::centered(1, 16.0, 256).unwrap();
        let a = RegionSupport::interval(1.0).unwrap();
        let cert = certificate_with_phi(&params, &a, 0.5, 20.0, 2.0).unwrap();
        let u0 = DensityField::from_fn(g, |x| if x[0].abs() <= 1.0 { 10.0 } else { 0.0 }).unwrap();
        let err = front_trace(&params, &p, &u0, &cert, &[2.0, 3.0], 1.0, 0.1).unwrap_err();
        assert!(err.to_string().contains("b < u0 < κ·b"));
    }
}
