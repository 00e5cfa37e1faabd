//! Solvers for the kinetic equation `u̇ = λ − m·u·e^{−(φ∗u)}` on a periodic
//! grid.
//!
//! [`Kinetic`] bundles the parameters with a precomputed [`Convolver`]; the
//! free functions [`rhs`] and [`step_mol`] are thin conveniences over it.
//! Method of lines uses classical RK4 and never clamps: nonnegativity is a
//! property of the equation, so it is monitored and reported instead.

use std::path::Path;

use serde::Serialize;

use crate::convolution::Convolver;
use crate::equilibria::{equilibria, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{DensityField, DomainGrid};
use crate::io::{fmt_f64, write_csv, write_json};
use crate::potential::{Potential, PotentialSpec};

pub mod checks;
pub mod front;
pub mod picard;

pub use checks::{check_bounded_regime, check_comparison, check_stability};
pub use front::{front_trace, FrontTrace, GrowthSample};
pub use picard::{phi_map, solve_picard, PicardSolution, TimeField};

/// Lowest value a trajectory may reach before positivity is reported violated.
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug)]
pub struct Kinetic {
    pub params: ModelParams,
    pub beta: f64,
    conv: Convolver,
}

impl Kinetic {
    pub fn new(params: &ModelParams, p: &Potential, grid: &DomainGrid) -> Result<Self> {
        params.validate()?;
        Ok(Self { params: *params, beta: p.beta(), conv: Convolver::new(p, grid)? })
    }

    pub fn grid(&self) -> &DomainGrid {
        self.conv.grid()
    }

    pub fn convolver(&self) -> &Convolver {
        &self.conv
    }

    /// `out = λ − m·u·e^{−(φ∗u)}`; `scratch` receives `φ∗u`.
    pub fn rhs_into(&self, u: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.conv.apply(u, scratch);
        let (m, lambda) = (self.params.m, self.params.lambda);
        for ((o, &ui), &ci) in out.iter_mut().zip(u).zip(scratch.iter()) {
            *o = lambda - m * ui * (-ci).exp();
        }
    }

    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let mut scratch = vec![0.0; u.len()];
        let mut out = vec![0.0; u.len()];
        self.rhs_into(u, &mut scratch, &mut out);
        out
    }

    /// `dt = min(10⁻², 0.1/(m + λ/κ₁))`, with `κ₁` replaced by 1 when there is
    /// no equilibrium.
    pub fn default_dt(&self) -> f64 {
        default_dt(&self.params, self.beta)
    }

    pub fn stepper(&self) -> Rk4<'_> {
        Rk4::new(self)
    }

    /// Integrates from `u0` to `t_end`, storing a snapshot at every multiple
    /// of `report_every` and at `t_end`.
    pub fn solve(&self, u0: &DensityField, t_end: f64, dt: f64, report_every: f64) -> Result<Trajectory> {
        if !(t_end > u0.time) {
            return Err(Error::Configuration(format!("t_end = {t_end} must exceed the initial time {}", u0.time)));
        }
        if !(dt > 0.0 && report_every > 0.0) {
            return Err(Error::Configuration("dt and report_every must be positive".into()));
        }
        let mut rk = self.stepper();
        let mut u = u0.values.clone();
        let mut t = u0.time;
        let mut traj = Trajectory::start(u0);
        let mut k = 1usize;
        while t < t_end {
            let target = (u0.time + k as f64 * report_every).min(t_end);
            rk.advance(&mut u, &mut t, target, dt)?;
            traj.record(self.grid(), &u, t);
            k += 1;
        }
        Ok(traj)
    }
}

pub fn default_dt(params: &ModelParams, beta: f64) -> f64 {
    let k1 = if beta > 0.0 {
        equilibria(params, beta).ok().and_then(|e| e.kappa1).unwrap_or(1.0)
    } else {
        params.lambda / params.m
    };
    (0.1 / (params.m + params.lambda / k1)).min(1e-2)
}

/// Classical RK4 with reusable stage buffers.
pub struct Rk4<'a> {
    model: &'a Kinetic,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Rk4<'a> {
    pub fn new(model: &'a Kinetic) -> Self {
        let n = model.grid().cells();
        Self {
            model,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            stage: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    /// One step of size `dt` in place.
    pub fn step(&mut self, u: &mut [f64], t: f64, dt: f64) -> Result<()> {
        let m = self.model;
        let [k1, k2, k3, k4] = &mut self.k;
        m.rhs_into(u, &mut self.scratch, k1);
        for i in 0..u.len() {
            self.stage[i] = u[i] + 0.5 * dt * k1[i];
        }
        m.rhs_into(&self.stage, &mut self.scratch, k2);
        for i in 0..u.len() {
            self.stage[i] = u[i] + 0.5 * dt * k2[i];
        }
        m.rhs_into(&self.stage, &mut self.scratch, k3);
        for i in 0..u.len() {
            self.stage[i] = u[i] + dt * k3[i];
        }
        m.rhs_into(&self.stage, &mut self.scratch, k4);
        for i in 0..u.len() {
            let next = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !next.is_finite() {
                return Err(Error::IntegrationFailure { time: t + dt, cell: i });
            }
            u[i] = next;
        }
        Ok(())
    }

    /// Advances from `*t` to `target` in equal steps no larger than `dt`.
    pub fn advance(&mut self, u: &mut [f64], t: &mut f64, target: f64, dt: f64) -> Result<()> {
        let span = target - *t;
        if span <= 0.0 {
            return Ok(());
        }
        let steps = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let t0 = *t;
        for s in 0..steps {
            self.step(u, t0 + s as f64 * h, h)?;
        }
        *t = target;
        Ok(())
    }
}

/// `λ − m·u·e^{−(φ∗u)}` for a single field.
pub fn rhs(params: &ModelParams, p: &Potential, u: &DensityField) -> Result<Vec<f64>> {
    Ok(Kinetic::new(params, p, &u.grid)?.rhs(&u.values))
}

/// One RK4 step of size `dt`.
pub fn step_mol(params: &ModelParams, p: &Potential, u: &DensityField, dt: f64) -> Result<DensityField> {
    if !(dt > 0.0) {
        return Err(Error::Configuration(format!("dt must be positive, got {dt}")));
    }
    let model = Kinetic::new(params, p, &u.grid)?;
    let mut v = u.values.clone();
    model.stepper().step(&mut v, u.time, dt)?;
    Ok(DensityField::raw(u.grid.clone(), v, u.time + dt))
}

pub fn solve_mol(
    params: &ModelParams,
    p: &Potential,
    u0: &DensityField,
    t_end: f64,
    dt: f64,
    report_every: f64,
) -> Result<Trajectory> {
    Kinetic::new(params, p, &u0.grid)?.solve(u0, t_end, dt, report_every)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<DensityField>,
    /// Smallest value seen at any stored snapshot.
    pub min_value: f64,
    /// Largest value seen at any stored snapshot.
    pub max_value: f64,
}

impl Trajectory {
    fn start(u0: &DensityField) -> Self {
        Self { snapshots: vec![u0.clone()], min_value: u0.min(), max_value: u0.max() }
    }

    fn record(&mut self, grid: &DomainGrid, u: &[f64], t: f64) {
        let f = DensityField::raw(grid.clone(), u.to_vec(), t);
        self.min_value = self.min_value.min(f.min());
        self.max_value = self.max_value.max(f.max());
        self.snapshots.push(f);
    }

    /// Nonnegativity up to [`POSITIVITY_TOL`].
    pub fn positivity_holds(&self) -> bool {
        self.min_value >= -POSITIVITY_TOL
    }

    pub fn last(&self) -> &DensityField {
        self.snapshots.last().expect("trajectory always holds the initial field")
    }

    /// Long-format CSV `t,i[,j],value` plus a JSON sidecar next to it.
    pub fn write(&self, csv_path: &Path, params: &ModelParams, potential: &PotentialSpec) -> Result<()> {
        let grid = &self.snapshots[0].grid;
        let header: Vec<&str> = if grid.dim == 1 { vec!["t", "i", "value"] } else { vec!["t", "i", "j", "value"] };
        let rows = self.snapshots.iter().flat_map(|s| {
            s.values.iter().enumerate().map(move |(idx, v)| {
                let ij = s.grid.unflatten(idx);
                let mut row = vec![fmt_f64(s.time), ij[0].to_string()];
                if s.grid.dim == 2 {
                    row.push(ij[1].to_string());
                }
                row.push(fmt_f64(*v));
                row
            })
        });
        write_csv(csv_path, &header, rows)?;
        #[derive(Serialize)]
        struct Sidecar<'a> {
            grid: &'a DomainGrid,
            params: &'a ModelParams,
            potential: &'a PotentialSpec,
            snapshot_times: Vec<f64>,
            min_value: f64,
            max_value: f64,
        }
        let sidecar = Sidecar {
            grid,
            params,
            potential,
            snapshot_times: self.snapshots.iter().map(|s| s.time).collect(),
            min_value: self.min_value,
            max_value: self.max_value,
        };
        write_json(csv_path.with_extension("json"), &sidecar)
    }
}
