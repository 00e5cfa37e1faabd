//! Replica estimators of the rescaled correlation functions.

use std::path::Path;

use serde::Serialize;

use super::config::Point;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv, write_json};

/// Fewest replicas the estimators accept.
pub const MIN_REPLICAS: usize = 8;

/// Periodic box the samples live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Torus {
    pub dim: usize,
    pub length: f64,
    pub origin: f64,
}

impl Torus {
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    fn distance(&self, a: &Point, b: &Point) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let v = a[k] - b[k];
            let w = v - self.length * (v / self.length).round();
            s += w * w;
        }
        s.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub bin_centers: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicas: usize,
}

impl CorrelationEstimate {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = (0..self.values.len())
            .map(|b| vec![fmt_f64(self.bin_centers[b]), fmt_f64(self.values[b]), fmt_f64(self.stderr[b])]);
        write_csv(path, &["bin_center", "value", "stderr"], rows)
    }
}

fn check_replicas(n: usize) -> Result<()> {
    if n < MIN_REPLICAS {
        return Err(Error::InsufficientData(format!("{n} replicas given, at least {MIN_REPLICAS} needed")));
    }
    Ok(())
}

fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Rescaled intensity on `nbins` equal slabs along the first axis:
/// `ε · mean count / slab volume`, with the standard error of the replica mean.
pub fn estimate_density(samples: &[Vec<Point>], eps: f64, torus: &Torus, nbins: usize) -> Result<CorrelationEstimate> {
    check_replicas(samples.len())?;
    if nbins == 0 {
        return Err(Error::Configuration("need at least one density bin".into()));
    }
    let width = torus.length / nbins as f64;
    let vol = width * torus.length.powi(torus.dim as i32 - 1);
    let mut per_bin = vec![Vec::with_capacity(samples.len()); nbins];
    for pts in samples {
        let mut counts = vec![0usize; nbins];
        for x in pts {
            let s = ((x[0] - torus.origin).rem_euclid(torus.length) / width).floor() as usize;
            counts[s.min(nbins - 1)] += 1;
        }
        for (b, c) in counts.into_iter().enumerate() {
            per_bin[b].push(eps * c as f64 / vol);
        }
    }
    let mut est = CorrelationEstimate {
        bin_centers: (0..nbins).map(|b| torus.origin + (b as f64 + 0.5) * width).collect(),
        values: Vec::with_capacity(nbins),
        stderr: Vec::with_capacity(nbins),
        replicas: samples.len(),
    };
    for s in &per_bin {
        let (m, e) = mean_stderr(s);
        est.values.push(m);
        est.stderr.push(e);
    }
    Ok(est)
}

/// Pair statistics on distance shells `[k·w, (k+1)·w)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEstimate {
    /// Rescaled second correlation averaged over the torus and the shell:
    /// `ε² · mean ordered-pair count / (L^d · shell volume)`.
    pub k2: CorrelationEstimate,
    /// Same normalization applied to pairs drawn from two different replicas,
    /// an unbiased estimate of the factorized `k1 ⊗ k1`.
    pub k1k1: Vec<f64>,
    /// `k2 / (k1 ⊗ k1)` with leave-one-replica-out jackknife errors.
    pub chaos_ratio: CorrelationEstimate,
}

impl PairEstimate {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = (0..self.k1k1.len()).map(|b| {
            vec![
                fmt_f64(self.k2.bin_centers[b]),
                fmt_f64(self.k2.values[b]),
                fmt_f64(self.k2.stderr[b]),
                fmt_f64(self.k1k1[b]),
                fmt_f64(self.chaos_ratio.values[b]),
                fmt_f64(self.chaos_ratio.stderr[b]),
            ]
        });
        write_csv(path, &["bin_center", "value", "stderr", "k1k1", "chaos_ratio", "chaos_stderr"], rows)
    }
}

fn shell_volume(dim: usize, r0: f64, r1: f64) -> f64 {
    if dim == 1 {
        2.0 * (r1 - r0)
    } else {
        std::f64::consts::PI * (r1 * r1 - r0 * r0)
    }
}

/// Pair correlation on `nbins` shells of width `width`. Within-replica pairs
/// give `k2`; cross-replica pairs give the factorized reference. Requires
/// `nbins · width < L/2`.
pub fn estimate_pair_correlation(
    samples: &[Vec<Point>],
    eps: f64,
    torus: &Torus,
    width: f64,
    nbins: usize,
) -> Result<PairEstimate> {
    check_replicas(samples.len())?;
    let r_max = width * nbins as f64;
    if !(width > 0.0 && nbins > 0 && r_max < 0.5 * torus.length) {
        return Err(Error::Configuration(format!(
            "distance bins must cover [0, r_max) with 0 < r_max = {r_max} < L/2"
        )));
    }
    let nrep = samples.len();
    // Pool every point, tagged by replica, and sort along the first axis.
    let mut pool: Vec<(f64, usize, Point)> = Vec::new();
    for (r, pts) in samples.iter().enumerate() {
        for x in pts {
            pool.push(((x[0] - torus.origin).rem_euclid(torus.length), r, *x));
        }
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // within[r][b]: unordered pairs inside replica r; cross[r][b]: unordered
    // pairs between r and any other replica.
    let mut within = vec![vec![0u64; nbins]; nrep];
    let mut cross = vec![vec![0u64; nbins]; nrep];
    let n = pool.len();
    for i in 0..n {
        for step in 1..n {
            let j = (i + step) % n;
            let gap = (pool[j].0 - pool[i].0).rem_euclid(torus.length);
            if gap >= r_max || j == i {
                break;
            }
            let d = torus.distance(&pool[i].2, &pool[j].2);
            if d >= r_max {
                continue;
            }
            let b = ((d / width).floor() as usize).min(nbins - 1);
            let (ri, rj) = (pool[i].1, pool[j].1);
            if ri == rj {
                within[ri][b] += 1;
            } else {
                cross[ri][b] += 1;
                cross[rj][b] += 1;
            }
        }
    }
    let mut k2 = CorrelationEstimate {
        bin_centers: (0..nbins).map(|b| (b as f64 + 0.5) * width).collect(),
        values: Vec::with_capacity(nbins),
        stderr: Vec::with_capacity(nbins),
        replicas: nrep,
    };
    let mut ratio = CorrelationEstimate {
        bin_centers: k2.bin_centers.clone(),
        values: Vec::with_capacity(nbins),
        stderr: Vec::with_capacity(nbins),
        replicas: nrep,
    };
    let mut k1k1 = Vec::with_capacity(nbins);
    let rf = nrep as f64;
    for b in 0..nbins {
        let norm = eps * eps / (torus.volume() * shell_volume(torus.dim, b as f64 * width, (b + 1) as f64 * width));
        let ordered: Vec<f64> = within.iter().map(|w| 2.0 * w[b] as f64 * norm).collect();
        let (m, e) = mean_stderr(&ordered);
        k2.values.push(m);
        k2.stderr.push(e);
        // Each unordered cross pair appears in two replicas' tallies.
        let w_sum: f64 = within.iter().map(|w| w[b] as f64).sum();
        let x_sum: f64 = cross.iter().map(|c| c[b] as f64).sum::<f64>() / 2.0;
        // Ordered cross pairs per ordered replica pair.
        let factor = 2.0 * x_sum / (rf * (rf - 1.0));
        k1k1.push(factor * norm);
        let theta = |w: f64, x: f64, r: f64| (2.0 * w / r) / (2.0 * x / (r * (r - 1.0)));
        let full = theta(w_sum, x_sum, rf);
        let loo: Vec<f64> =
            (0..nrep).map(|r| theta(w_sum - within[r][b] as f64, x_sum - cross[r][b] as f64, rf - 1.0)).collect();
        let mean_loo = loo.iter().sum::<f64>() / rf;
        let var = (rf - 1.0) / rf * loo.iter().map(|t| (t - mean_loo).powi(2)).sum::<f64>();
        ratio.values.push(full);
        ratio.stderr.push(var.sqrt());
    }
    Ok(PairEstimate { k2, k1k1, chaos_ratio: ratio })
}

/// Run manifest written next to a snapshot CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SnapshotManifest<P: Serialize, S: Serialize> {
    pub params: P,
    pub potential: S,
    pub epsilon: f64,
    pub torus: Torus,
    pub base_seed: u64,
    pub replicas: usize,
    pub snapshot_times: Vec<f64>,
}

/// Writes `replica,t,x1[,x2]`, one particle per row, and the manifest as
/// `<path>.json`.
pub fn write_snapshots<P: Serialize, S: Serialize>(
    path: &Path,
    runs: &[Vec<super::sim::Snapshot>],
    manifest: &SnapshotManifest<P, S>,
) -> Result<()> {
    let dim = manifest.torus.dim;
    let header: &[&str] = if dim == 1 { &["replica", "t", "x1"] } else { &["replica", "t", "x1", "x2"] };
    let rows = runs.iter().enumerate().flat_map(|(r, snaps)| {
        snaps.iter().flat_map(move |s| {
            s.positions.iter().map(move |x| {
                let mut row = vec![r.to_string(), fmt_f64(s.t)];
                row.extend(x[..dim].iter().map(|&v| fmt_f64(v)));
                row
            })
        })
    });
    write_csv(path, header, rows)?;
    write_json(path.with_extension("json"), manifest)
}
