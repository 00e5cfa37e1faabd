//! Exact event simulation of the ε-rescaled birth-and-death generator.
//!
//! Births arrive at total rate `(λ/ε)·L^d`, uniformly on the torus. Particle
//! `i` dies at rate `m·e^{−ε·E_i}`. Death rates live in a Fenwick tree so both
//! sampling and the local updates after an event cost `O(log N)` per touched
//! particle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::Serialize;

use super::config::{ParticleConfiguration, Point};
use super::fenwick::Fenwick;
use crate::equilibria::ModelParams;
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::potential::Potential;

/// Default hard cap on the population.
pub const POPULATION_CAP: usize = 10_000_000;
/// Relative tolerance of the rate audit.
pub const AUDIT_TOL: f64 = 1e-6;
const REBUILD_EVERY: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    Birth { t: f64, index: usize },
    Death { t: f64, index: usize },
}

impl Event {
    pub fn time(&self) -> f64 {
        match *self {
            Event::Birth { t, .. } | Event::Death { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    config: ParticleConfiguration,
    params: ModelParams,
    t: f64,
    seed: u64,
    rng: ChaCha8Rng,
    rates: Fenwick,
    birth_rate: f64,
    events: u64,
    cap: usize,
    audit_every: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    CapacityExceeded { t: f64, population: usize },
}

/// Snapshots emitted before the run ended, with the reason it ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    pub events: u64,
}

impl RunOutput {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Converts a capped run into [`Error::Capacity`].
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            RunStatus::Completed => Ok(self),
            RunStatus::CapacityExceeded { t, population } => Err(Error::Capacity(format!(
                "population {population} reached the cap at t = {t} after {} snapshots",
                self.snapshots.len()
            ))),
        }
    }
}

impl SimState {
    /// Starts from explicit positions. `length` and `origin` describe the
    /// torus `[origin, origin + length)^d`.
    pub fn from_positions(
        params: &ModelParams,
        potential: &Potential,
        length: f64,
        origin: f64,
        positions: &[Point],
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        let mut config = ParticleConfiguration::new(potential, length, origin)?;
        for &x in positions {
            config.insert(x);
        }
        let mut s = Self {
            birth_rate: params.lambda / params.epsilon * config.volume(),
            config,
            params: *params,
            t: 0.0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rates: Fenwick::new(),
            events: 0,
            cap: POPULATION_CAP,
            audit_every: None,
        };
        s.rebuild_rates();
        Ok(s)
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    /// Audits cached rates every `n` events inside [`SimState::gillespie_step`].
    pub fn with_audit_every(mut self, n: u64) -> Self {
        self.audit_every = Some(n.max(1));
        self
    }

    fn death_rate(&self, energy: f64) -> f64 {
        self.params.m * (-self.params.epsilon * energy).exp()
    }

    fn rebuild_rates(&mut self) {
        let r: Vec<f64> = self.config.energies().iter().map(|&e| self.death_rate(e)).collect();
        self.rates = Fenwick::from_values(&r);
    }

    pub fn config(&self) -> &ParticleConfiguration {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn population(&self) -> usize {
        self.config.len()
    }

    pub fn birth_rate(&self) -> f64 {
        self.birth_rate
    }

    pub fn death_rates(&self) -> &[f64] {
        self.rates.values()
    }

    /// Incrementally maintained total event rate.
    pub fn total_rate(&self) -> f64 {
        self.birth_rate + self.rates.total()
    }

    /// Total event rate recomputed from scratch (energies by double loop).
    pub fn recompute_total_rate(&self) -> f64 {
        self.birth_rate + self.config.recompute_energies().iter().map(|&e| self.death_rate(e)).sum::<f64>()
    }

    /// Largest relative error between cached and recomputed death rates, and
    /// of the total rate. Fails with [`Error::Consistency`] above [`AUDIT_TOL`].
    pub fn audit(&self) -> Result<f64> {
        let energies = self.config.recompute_energies();
        let mut worst = 0.0f64;
        for (i, &e) in energies.iter().enumerate() {
            let exact = self.death_rate(e);
            worst = worst.max((self.rates.get(i) - exact).abs() / exact);
        }
        let total = self.recompute_total_rate();
        worst = worst.max((self.total_rate() - total).abs() / total);
        if !(worst <= AUDIT_TOL) {
            return Err(Error::Consistency(format!(
                "cached rates deviate from recomputation by {worst:e} (relative) after {} events",
                self.events
            )));
        }
        Ok(worst)
    }

    fn checked_total(&self) -> Result<f64> {
        let total = self.total_rate();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Consistency(format!("total event rate {total} is not finite and positive")));
        }
        Ok(total)
    }

    fn waiting_time(&mut self, total: f64) -> f64 {
        let e: f64 = Exp1.sample(&mut self.rng);
        e / total
    }

    /// Chooses and applies the event at time `t`, with `total` the current
    /// total rate.
    fn fire(&mut self, t: f64, total: f64) -> Event {
        self.t = t;
        self.events += 1;
        let u = self.rng.random::<f64>() * total;
        let event = if u < self.birth_rate || self.config.is_empty() {
            let mut x = [0.0; 2];
            for a in 0..self.config.dim() {
                x[a] = self.config.origin() + self.rng.random::<f64>() * self.config.length();
            }
            let (i, touched) = self.config.insert(x);
            self.rates.push(self.death_rate(self.config.energies()[i]));
            self.refresh(&touched);
            Event::Birth { t, index: i }
        } else {
            let i = self.rates.find(u - self.birth_rate);
            let touched = self.config.remove(i);
            self.rates.swap_remove(i);
            self.refresh(&touched);
            Event::Death { t, index: i }
        };
        if self.events % REBUILD_EVERY == 0 {
            self.rates.rebuild();
        }
        event
    }

    fn refresh(&mut self, touched: &[usize]) {
        for &j in touched {
            let r = self.death_rate(self.config.energies()[j]);
            self.rates.set(j, r);
        }
    }

    /// One exact event: exponential waiting time with the total rate, then a
    /// birth or a death chosen proportionally to the rates.
    pub fn gillespie_step(&mut self) -> Result<Event> {
        let total = self.checked_total()?;
        let t = self.t + self.waiting_time(total);
        let ev = self.fire(t, total);
        if let Some(n) = self.audit_every {
            if self.events % n == 0 {
                self.audit()?;
            }
        }
        Ok(ev)
    }

    /// Runs to `t_end`. Each snapshot time `s` records the configuration
    /// holding on `[t_k, t_{k+1})` with `t_k ≤ s < t_{k+1}`, i.e. the state
    /// just before the first event after `s`. Stops early, keeping the
    /// snapshots taken so far, when the population reaches the cap.
    pub fn run(&mut self, t_end: f64, snapshot_times: &[f64]) -> Result<RunOutput> {
        if !(t_end > self.t) {
            return Err(Error::Configuration(format!("t_end = {t_end} must exceed the current time {}", self.t)));
        }
        if snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Configuration("snapshot times must be nondecreasing".into()));
        }
        if let Some(&s) = snapshot_times.iter().find(|&&s| s < self.t || s > t_end) {
            return Err(Error::Configuration(format!("snapshot time {s} lies outside [{}, {t_end}]", self.t)));
        }
        let mut snapshots = Vec::with_capacity(snapshot_times.len());
        let mut next = 0;
        loop {
            let total = self.checked_total()?;
            let t_next = self.t + self.waiting_time(total);
            while next < snapshot_times.len() && snapshot_times[next] < t_next {
                snapshots.push(Snapshot { t: snapshot_times[next], positions: self.config.positions().to_vec() });
                next += 1;
            }
            if t_next > t_end {
                self.t = t_end;
                break;
            }
            if self.config.len() >= self.cap {
                let status = RunStatus::CapacityExceeded { t: self.t, population: self.config.len() };
                return Ok(RunOutput { snapshots, status, events: self.events });
            }
            self.fire(t_next, total);
            if let Some(n) = self.audit_every {
                if self.events % n == 0 {
                    self.audit()?;
                }
            }
        }
        Ok(RunOutput { snapshots, status: RunStatus::Completed, events: self.events })
    }
}

/// Poisson point process with intensity `u₀(x)/ε` on the torus spanned by the
/// field's grid, sampled by thinning a homogeneous process at `max u₀/ε`.
/// `u₀` is read as piecewise constant on grid cells.
pub fn init_poisson(
    params: &ModelParams,
    potential: &Potential,
    intensity: &DensityField,
    seed: u64,
) -> Result<SimState> {
    init_poisson_capped(params, potential, intensity, seed, POPULATION_CAP)
}

pub fn init_poisson_capped(
    params: &ModelParams,
    potential: &Potential,
    intensity: &DensityField,
    seed: u64,
    cap: usize,
) -> Result<SimState> {
    params.validate()?;
    let grid = &intensity.grid;
    if grid.dim != potential.dim() {
        return Err(Error::Configuration(format!(
            "intensity field has d = {} but the potential has d = {}",
            grid.dim,
            potential.dim()
        )));
    }
    let volume = grid.length.powi(grid.dim as i32);
    let expected: f64 = intensity.mass() / params.epsilon;
    if expected > cap as f64 {
        return Err(Error::Capacity(format!("expected initial count {expected} exceeds the cap {cap}")));
    }
    let umax = intensity.max();
    let mut state = SimState::from_positions(params, potential, grid.length, grid.origin, &[], seed)?.with_cap(cap);
    if umax == 0.0 {
        return Ok(state);
    }
    // The simulation stream starts from the same seed; use a derived stream
    // for the initial law so both are reproducible and independent.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mean = umax / params.epsilon * volume;
    let n = Poisson::new(mean).map_err(|e| Error::Configuration(format!("Poisson mean {mean}: {e}")))?.sample(&mut rng)
        as usize;
    let mut pts = Vec::new();
    for _ in 0..n {
        let mut x = [0.0; 2];
        for a in 0..grid.dim {
            x[a] = grid.origin + rng.random::<f64>() * grid.length;
        }
        let u = intensity.values[grid.locate(&x[..grid.dim])];
        if rng.random::<f64>() * umax < u {
            pts.push(x);
        }
    }
    for x in pts {
        state.config.insert(x);
    }
    state.rebuild_rates();
    Ok(state)
}
