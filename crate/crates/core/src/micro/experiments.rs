//! Replica experiments: micro↔meso convergence and the fluctuation growth
//! demonstration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::estimate::{estimate_density, estimate_pair_correlation, CorrelationEstimate, PairEstimate, Torus};
use super::sim::{init_poisson, RunOutput, SimState};
use crate::equilibria::ModelParams;
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::meso::Kinetic;
use crate::potential::{Potential, RegionSupport};
use crate::report::{Check, Report};

/// Bound on `|k1 − u_t|` and `|ratio − 1|` in units of the standard error.
pub const Z_LIMIT: f64 = 3.0;

/// Runs `replicas` independent trajectories from `Poisson(u0/ε)`, replica `r`
/// seeded with `base_seed + r`. Output order follows the replica index.
pub fn run_replicas(
    params: &ModelParams,
    potential: &Potential,
    u0: &DensityField,
    replicas: usize,
    base_seed: u64,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<Vec<RunOutput>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut s = init_poisson(params, potential, u0, base_seed + r)?;
            s.run(t_end, snapshot_times)?.into_result()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareOptions {
    pub eps_list: Vec<f64>,
    pub t_end: f64,
    pub replicas: usize,
    pub base_seed: u64,
    /// Slabs along the first axis for the density comparison.
    pub density_bins: usize,
    /// Width and count of the distance shells for the chaos ratio.
    pub pair_width: f64,
    pub pair_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonResult {
    pub eps: f64,
    pub density: CorrelationEstimate,
    /// Kinetic solution averaged over each slab.
    pub meso_binned: Vec<f64>,
    /// `(k1 − ū)/stderr` per slab.
    pub z: Vec<f64>,
    pub max_abs_z: f64,
    /// Root mean square of `k1 − ū` over slabs.
    pub discrepancy: f64,
    pub pair: PairEstimate,
    /// Largest `|ratio − 1|/stderr` over shells beyond the first.
    pub max_chaos_z: f64,
    pub mean_population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicroMesoComparison {
    pub results: Vec<EpsilonResult>,
    pub meso_final: Vec<f64>,
    #[serde(skip)]
    pub report: Report,
}

fn slab_average(u: &DensityField, nbins: usize) -> Vec<f64> {
    let g = &u.grid;
    let per = g.n / nbins;
    let mut sums = vec![0.0; nbins];
    for idx in 0..g.cells() {
        sums[g.unflatten(idx)[0] / per] += u.values[idx];
    }
    let cells_per_bin = (g.cells() / nbins) as f64;
    sums.iter().map(|s| s / cells_per_bin).collect()
}

fn zscore(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Solves the kinetic equation from `u0` and, for each ε, runs the rescaled
/// particle system from `Poisson(u0/ε)` to `t_end`. Checks that the binned
/// intensity at the smallest ε is within [`Z_LIMIT`] standard errors of the
/// kinetic solution, that the discrepancy does not grow as ε decreases, and
/// that the chaos ratio at the smallest ε is within [`Z_LIMIT`] standard
/// errors of 1 on every shell beyond the first.
pub fn micro_meso_compare(
    params: &ModelParams,
    potential: &Potential,
    u0: &DensityField,
    opts: &CompareOptions,
) -> Result<MicroMesoComparison> {
    let grid = &u0.grid;
    if opts.eps_list.is_empty() || opts.eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::Configuration("eps_list must hold values in (0, 1]".into()));
    }
    if opts.density_bins == 0 || grid.n % opts.density_bins != 0 {
        return Err(Error::Configuration(format!(
            "density_bins = {} must divide the grid size {}",
            opts.density_bins, grid.n
        )));
    }
    if !(opts.t_end > 0.0) {
        return Err(Error::Configuration("t_end must be positive".into()));
    }
    let model = Kinetic::new(params, potential, grid)?;
    let traj = model.solve(u0, opts.t_end, model.default_dt(), opts.t_end)?;
    let u_t = traj.last().clone();
    let meso = slab_average(&u_t, opts.density_bins);
    let torus = Torus { dim: grid.dim, length: grid.length, origin: grid.origin };

    let mut eps_sorted = opts.eps_list.clone();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut results = Vec::with_capacity(eps_sorted.len());
    for &eps in &eps_sorted {
        let p_eps = ModelParams { epsilon: eps, ..*params };
        let runs = run_replicas(&p_eps, potential, u0, opts.replicas, opts.base_seed, opts.t_end, &[opts.t_end])?;
        let samples: Vec<_> = runs.into_iter().map(|r| r.snapshots.into_iter().next().unwrap().positions).collect();
        let mean_population = samples.iter().map(|s| s.len() as f64).sum::<f64>() / samples.len() as f64;
        let density = estimate_density(&samples, eps, &torus, opts.density_bins)?;
        let pair = estimate_pair_correlation(&samples, eps, &torus, opts.pair_width, opts.pair_bins)?;
        let z: Vec<f64> = (0..meso.len()).map(|b| zscore(density.values[b] - meso[b], density.stderr[b])).collect();
        let max_abs_z = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let discrepancy =
            ((0..meso.len()).map(|b| (density.values[b] - meso[b]).powi(2)).sum::<f64>() / meso.len() as f64).sqrt();
        let max_chaos_z = (1..opts.pair_bins)
            .map(|b| zscore(pair.chaos_ratio.values[b] - 1.0, pair.chaos_ratio.stderr[b]).abs())
            .fold(0.0f64, f64::max);
        results.push(EpsilonResult {
            eps,
            density,
            meso_binned: meso.clone(),
            z,
            max_abs_z,
            discrepancy,
            pair,
            max_chaos_z,
            mean_population,
        });
    }

    let mut report = Report::default();
    let finest = results.last().unwrap();
    report.push(Check::at_most(format!("max |k1 − u_t|/stderr at ε = {}", finest.eps), finest.max_abs_z, Z_LIMIT));
    for w in results.windows(2) {
        report.push(Check::at_most(
            format!("discrepancy at ε = {} ≤ discrepancy at ε = {}", w[1].eps, w[0].eps),
            w[1].discrepancy,
            w[0].discrepancy,
        ));
    }
    report.push(Check::at_most(
        format!("max |chaos ratio − 1|/stderr beyond the first shell at ε = {}", finest.eps),
        finest.max_chaos_z,
        Z_LIMIT,
    ));
    Ok(MicroMesoComparison { results, meso_final: u_t.values, report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationDemo {
    pub times: Vec<f64>,
    /// Mean and standard error of the count in the region, started from
    /// `initial_count` particles there.
    pub seeded_mean: Vec<f64>,
    pub seeded_stderr: Vec<f64>,
    /// Same, started from the empty configuration.
    pub empty_mean: Vec<f64>,
    pub empty_stderr: Vec<f64>,
    /// Replicas that reached the population cap; their later counts are
    /// recorded as the count at the cap.
    pub capped_replicas: usize,
    #[serde(skip)]
    pub report: Report,
}

/// Geometry and sampling for [`fluctuation_growth_demo`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoOptions {
    pub length: f64,
    pub origin: f64,
    pub t_end: f64,
    pub samples: usize,
    pub replicas: usize,
    pub base_seed: u64,
    pub cap: usize,
}

fn counts_in_region(
    params: &ModelParams,
    potential: &Potential,
    region: &RegionSupport,
    start: &[[f64; 2]],
    times: &[f64],
    opts: &DemoOptions,
    seed: u64,
) -> Result<(Vec<f64>, bool)> {
    let mut s = SimState::from_positions(params, potential, opts.length, opts.origin, start, seed)?.with_cap(opts.cap);
    let out = s.run(opts.t_end, times)?;
    let dim = potential.dim();
    let mut counts: Vec<f64> = out
        .snapshots
        .iter()
        .map(|snap| snap.positions.iter().filter(|x| region.contains(&x[..dim])).count() as f64)
        .collect();
    let capped = !out.completed();
    if capped {
        let last = s.config().positions().iter().filter(|x| region.contains(&x[..dim])).count() as f64;
        counts.resize(times.len(), last);
    }
    Ok((counts, capped))
}

/// Tracks the mean particle count in `region` at ε = 1 from two starts:
/// `initial_count` particles placed uniformly in the region, and the empty
/// configuration. Reports whether the seeded count grows over `[0, t_end]`
/// and whether the empty start levels off over the second half of the run.
pub fn fluctuation_growth_demo(
    params: &ModelParams,
    potential: &Potential,
    region: &RegionSupport,
    initial_count: usize,
    opts: &DemoOptions,
) -> Result<FluctuationDemo> {
    region.validate()?;
    if region.dim() != potential.dim() {
        return Err(Error::Configuration("region and potential dimensions differ".into()));
    }
    if opts.replicas < 2 || opts.samples < 2 || !(opts.t_end > 0.0) {
        return Err(Error::Configuration("need ≥ 2 replicas, ≥ 2 samples and t_end > 0".into()));
    }
    let p1 = ModelParams { epsilon: 1.0, ..*params };
    let times: Vec<f64> = (0..opts.samples).map(|k| opts.t_end * k as f64 / (opts.samples - 1) as f64).collect();
    let dim = potential.dim();
    let runs: Vec<((Vec<f64>, bool), (Vec<f64>, bool))> = (0..opts.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let seed = opts.base_seed + r;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2);
            let start: Vec<[f64; 2]> = (0..initial_count)
                .map(|_| {
                    let mut x = [0.0; 2];
                    for a in 0..dim {
                        x[a] = region.lo[a] + rng.random::<f64>() * (region.hi[a] - region.lo[a]);
                    }
                    x
                })
                .collect();
            let seeded = counts_in_region(&p1, potential, region, &start, &times, opts, seed)?;
            let empty = counts_in_region(&p1, potential, region, &[], &times, opts, seed)?;
            Ok((seeded, empty))
        })
        .collect::<Result<_>>()?;
    let n = runs.len() as f64;
    let stats = |pick: &dyn Fn(&((Vec<f64>, bool), (Vec<f64>, bool))) -> &Vec<f64>| {
        let mut mean = Vec::with_capacity(times.len());
        let mut se = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            let xs: Vec<f64> = runs.iter().map(|r| pick(r)[k]).collect();
            let m = xs.iter().sum::<f64>() / n;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
            mean.push(m);
            se.push((v / n).sqrt());
        }
        (mean, se)
    };
    let (seeded_mean, seeded_stderr) = stats(&|r| &r.0 .0);
    let (empty_mean, empty_stderr) = stats(&|r| &r.1 .0);
    let capped_replicas = runs.iter().filter(|r| r.0 .1 || r.1 .1).count();

    let last = times.len() - 1;
    let mid = last / 2;
    let mut report = Report::default();
    report.push(Check::at_least(
        "seeded mean count at t_end exceeds the initial count",
        seeded_mean[last],
        initial_count as f64,
    ));
    let drift = (empty_mean[last] - empty_mean[mid]).abs();
    let noise = 4.0 * (empty_stderr[last].powi(2) + empty_stderr[mid].powi(2)).sqrt();
    report.push(Check::at_most("empty start: |mean(t_end) − mean(t_end/2)| within 4σ", drift, noise));
    Ok(FluctuationDemo { times, seeded_mean, seeded_stderr, empty_mean, empty_stderr, capped_replicas, report })
}
