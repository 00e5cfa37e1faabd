//! Invariants of the event simulator and the replica estimators.

use aggrokin_core::equilibria::ModelParams;
use aggrokin_core::grid::{DensityField, DomainGrid};
use aggrokin_core::micro::{
    estimate_density, estimate_pair_correlation, init_poisson, Event, ParticleConfiguration, SimState, Torus,
};
use aggrokin_core::potential::Potential;
use proptest::prelude::*;

fn params(m: f64, lambda: f64, eps: f64) -> ModelParams {
    ModelParams::new(m, lambda, eps).unwrap()
}

fn box_kernel() -> Potential {
    Potential::indicator_box(1, 0.5, 1.0).unwrap()
}

#[test]
fn energy_cache_survives_long_runs() {
    let p = Potential::triangle(2, 0.8, 1.0).unwrap();
    let g = DomainGrid::new(2, 6.0, 16, 0.0).unwrap();
    let u0 = DensityField::constant(g, 1.0).unwrap();
    let mut s = init_poisson(&params(1.0, 0.3, 0.5), &p, &u0, 4).unwrap();
    for _ in 0..100_000 {
        s.gillespie_step().unwrap();
    }
    assert!(s.config().audit() < 1e-6);
    assert!(s.audit().unwrap() < 1e-6);
}

#[test]
fn total_rate_bookkeeping() {
    let g = DomainGrid::new(1, 10.0, 16, 0.0).unwrap();
    let u0 = DensityField::constant(g, 1.5).unwrap();
    for seed in 0..5 {
        let mut s = init_poisson(&params(1.0, 1.0, 0.25), &box_kernel(), &u0, seed).unwrap();
        for _ in 0..10_000 {
            s.gillespie_step().unwrap();
        }
        let exact = s.recompute_total_rate();
        assert!((s.total_rate() - exact).abs() <= 1e-8 * exact);
    }
}

#[test]
fn same_seed_same_events() {
    let g = DomainGrid::new(1, 10.0, 16, 0.0).unwrap();
    let u0 = DensityField::constant(g, 1.0).unwrap();
    let run = |seed| {
        let mut s = init_poisson(&params(1.0, 1.0, 0.5), &box_kernel(), &u0, seed).unwrap();
        (0..5_000).map(|_| s.gillespie_step().unwrap()).collect::<Vec<Event>>()
    };
    let (a, b) = (run(17), run(17));
    assert!(a.iter().zip(&b).all(|(x, y)| x.time().to_bits() == y.time().to_bits() && x == y));
    assert_ne!(run(17), run(18));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighbours_never_raise_death_rates(
        xs in prop::collection::vec(0.0..10.0f64, 1..30),
        target in 0usize..30,
        offset in -0.5..0.5f64,
        eps in 0.05..1.0f64,
    ) {
        let p = box_kernel();
        let i = target % xs.len();
        let pts: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
        let before = SimState::from_positions(&params(1.0, 1.0, eps), &p, 10.0, 0.0, &pts, 0).unwrap();
        let mut more = pts.clone();
        more.push([xs[i] + offset, 0.0]);
        let after = SimState::from_positions(&params(1.0, 1.0, eps), &p, 10.0, 0.0, &more, 0).unwrap();
        prop_assert!(after.death_rates()[i] <= before.death_rates()[i]);
    }

    #[test]
    fn configuration_cache_matches_double_loop(ops in prop::collection::vec((any::<bool>(), 0.0..5.0f64, 0.0..5.0f64), 1..200)) {
        let p = Potential::truncated_gaussian(2, 0.3, 1.3).unwrap();
        let mut c = ParticleConfiguration::new(&p, 5.0, 0.0).unwrap();
        for (insert, x, y) in ops {
            if insert || c.is_empty() {
                c.insert([x, y]);
            } else {
                let k = ((x / 5.0) * c.len() as f64) as usize;
                c.remove(k.min(c.len() - 1));
            }
        }
        prop_assert!(c.audit() < 1e-12);
    }
}

#[test]
fn isolated_lifetime_is_exponential() {
    // Births are negligible at this rate; the tracked particle is found by position.
    let (m, replicas) = (2.0, 10_000);
    let p = Potential::zero(1, 0.5).unwrap();
    let mut sum = 0.0;
    for r in 0..replicas {
        let x = [3.3, 0.0];
        let mut s = SimState::from_positions(&params(m, 1e-6, 1.0), &p, 10.0, 0.0, &[x], r).unwrap();
        assert_eq!(s.death_rates(), &[m]);
        loop {
            let ev = s.gillespie_step().unwrap();
            if !s.config().positions().contains(&x) {
                sum += ev.time();
                break;
            }
        }
    }
    let mean = sum / replicas as f64;
    // Exponential(m): standard error of the mean is 1/(m√n).
    let z = (mean - 1.0 / m) / (1.0 / (m * (replicas as f64).sqrt()));
    assert!(z.abs() <= 4.0, "mean lifetime {mean}, z = {z}");
}

#[test]
fn poisson_initial_count() {
    let (c, eps, draws) = (0.8, 0.25, 1000);
    let g = DomainGrid::new(1, 10.0, 16, 0.0).unwrap();
    let u0 = DensityField::constant(g, c).unwrap();
    let counts: Vec<f64> = (0..draws)
        .map(|seed| init_poisson(&params(1.0, 1.0, eps), &box_kernel(), &u0, seed).unwrap().population() as f64)
        .collect();
    let expected = c * 10.0 / eps;
    let mean = counts.iter().sum::<f64>() / draws as f64;
    let z = (mean - expected) / (expected / draws as f64).sqrt();
    assert!(z.abs() <= 4.0, "mean {mean} vs {expected}");
}

#[test]
fn thinning_gives_regional_poisson_counts() {
    // Step intensity: 2 on [0, 5), 0.5 on [5, 10).
    let g = DomainGrid::new(1, 10.0, 16, 0.0).unwrap();
    let u0 = DensityField::from_fn(g, |x| if x[0] < 5.0 { 2.0 } else { 0.5 }).unwrap();
    let draws = 1000;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for seed in 0..draws {
        let s = init_poisson(&params(1.0, 1.0, 0.5), &box_kernel(), &u0, seed).unwrap();
        let l = s.config().positions().iter().filter(|x| x[0] < 5.0).count() as f64;
        left.push(l);
        right.push(s.population() as f64 - l);
    }
    for (counts, mu) in [(left, 2.0 * 5.0 / 0.5), (right, 0.5 * 5.0 / 0.5)] {
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(((mean - mu) / (mu / n).sqrt()).abs() <= 4.0, "mean {mean} vs {mu}");
        assert!(((var - mu) / ((mu + 2.0 * mu * mu) / n).sqrt()).abs() <= 4.0, "var {var} vs {mu}");
    }
}

fn static_samples(c: f64, eps: f64, replicas: u64) -> Vec<Vec<[f64; 2]>> {
    let g = DomainGrid::new(1, 10.0, 16, 0.0).unwrap();
    let u0 = DensityField::constant(g, c).unwrap();
    (0..replicas)
        .map(|r| {
            init_poisson(&params(1.0, 1.0, eps), &box_kernel(), &u0, 500 + r).unwrap().config().positions().to_vec()
        })
        .collect()
}

#[test]
fn density_estimate_of_static_poisson() {
    let torus = Torus { dim: 1, length: 10.0, origin: 0.0 };
    let coarse = estimate_density(&static_samples(1.2, 0.5, 400), 0.5, &torus, 5).unwrap();
    let fine = estimate_density(&static_samples(1.2, 0.25, 400), 0.25, &torus, 5).unwrap();
    for est in [&coarse, &fine] {
        for (v, e) in est.values.iter().zip(&est.stderr) {
            assert!((v - 1.2).abs() <= 4.0 * e, "{v} ± {e}");
        }
    }
    // Halving ε halves the per-particle weight and doubles the count.
    let ratio: f64 = coarse.stderr.iter().sum::<f64>() / fine.stderr.iter().sum::<f64>();
    assert!((ratio - 2f64.sqrt()).abs() < 0.15, "stderr ratio {ratio}");
}

#[test]
fn chaos_ratio_of_static_poisson() {
    let torus = Torus { dim: 1, length: 10.0, origin: 0.0 };
    let est = estimate_pair_correlation(&static_samples(1.0, 0.25, 200), 0.25, &torus, 0.5, 8).unwrap();
    for (v, e) in est.chaos_ratio.values.iter().zip(&est.chaos_ratio.stderr) {
        assert!((v - 1.0).abs() <= 4.0 * e, "{v} ± {e}");
    }
}
