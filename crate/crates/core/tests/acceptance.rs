//! Acceptance suite. Prints one PASS/FAIL line per criterion, with the
//! measured quantity, its limit and the runtime against the budget.
//!
//! Criteria listed in `EXPECTED_FAILURES` are known not to hold for the
//! model as stated; they are still run and reported as FAIL. The process
//! exits nonzero if any other criterion fails, or if an expected failure
//! starts passing.

use std::time::{Duration, Instant};

use aggrokin_core::aggregation::{asymptotic_check, compare_forms, fit_front, front_bhat, recurrence, FrontPredictor};
use aggrokin_core::equilibria::{equilibria, existence_horizon, make_certificate, ModelParams, Regime};
use aggrokin_core::grid::{DensityField, DomainGrid};
use aggrokin_core::meso::checks::random_smooth_field;
use aggrokin_core::meso::picard::contraction_window;
use aggrokin_core::meso::{
    check_bounded_regime, check_comparison, check_stability, front_trace, solve_picard, Kinetic,
};
use aggrokin_core::micro::{micro_meso_compare, CompareOptions, SimState};
use aggrokin_core::potential::{Potential, RegionSupport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPECTED_FAILURES: &[u32] = &[9];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random one-dimensional kernel with a grid resolving it (pitch = cutoff/8,
/// L = 8·cutoff), or a two-dimensional one on a 32×32 grid.
fn random_setup(rng: &mut ChaCha8Rng, dim: usize) -> (Potential, DomainGrid) {
    let width = rng.random_range(0.3..1.0);
    let amp = rng.random_range(0.2..2.0);
    let p = match rng.random_range(0..3) {
        0 => Potential::indicator_box(dim, width, amp),
        1 => Potential::triangle(dim, width, amp),
        _ => Potential::truncated_gaussian(dim, width / 3.0, amp),
    }
    .unwrap();
    let r = p.cutoff_radius();
    let grid = if dim == 1 {
        DomainGrid::new(1, 8.0 * r, 64, 0.0).unwrap()
    } else {
        DomainGrid::new(2, 8.0 * r, 32, 0.0).unwrap()
    };
    (p, grid)
}

/// Subcritical parameters for a kernel with integral `beta`.
fn random_subcritical(rng: &mut ChaCha8Rng, beta: f64) -> ModelParams {
    let m = rng.random_range(0.5..2.0);
    let x = rng.random_range(0.02..0.9) / std::f64::consts::E;
    ModelParams::new(m, x * m / beta, 1.0).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut bracket_ok) = (0.0f64, true);
    for _ in 0..1000 {
        let m = log_uniform(&mut rng, 0.1, 10.0);
        let beta = log_uniform(&mut rng, 0.1, 10.0);
        let x = rng.random_range(1e-6..1.0) / std::f64::consts::E;
        let params = ModelParams::new(m, x * m / beta, 1.0).unwrap();
        let eq = equilibria(&params, beta).unwrap();
        if eq.regime == Regime::Critical {
            continue;
        }
        let (k1, k2) = (eq.kappa1.unwrap(), eq.kappa2.unwrap());
        for k in [k1, k2] {
            worst = worst.max((params.lambda - m * k * (-beta * k).exp()).abs());
        }
        bracket_ok &= k1 < 1.0 / beta && 1.0 / beta < k2;
    }
    outcome(worst < 1e-10 && bracket_ok, format!("max residual {worst:.2e} < 1e-10, κ₁ < 1/β < κ₂: {bracket_ok}"))
}

/// Dormand–Prince 5(4) with step control, for the scalar oracle.
fn scalar_oracle(f: impl Fn(f64) -> f64, y0: f64, t_end: f64) -> f64 {
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] =
        [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
    let (mut t, mut y, mut h): (f64, f64, f64) = (0.0, y0, 1e-3);
    while t < t_end {
        h = h.min(t_end - t);
        let mut k = [0.0; 7];
        k[0] = f(y);
        for s in 0..6 {
            let yi = y + h * (0..=s).map(|j| C[s][j] * k[j]).sum::<f64>();
            k[s + 1] = f(yi);
        }
        let y5 = y + h * (0..6).map(|j| C[5][j] * k[j]).sum::<f64>();
        let err = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
        let tol = 1e-14 * (1.0 + y.abs());
        if err.abs() <= tol {
            t += h;
            y = y5;
        }
        let fac = if err == 0.0 { 5.0 } else { 0.9 * (tol / err.abs()).powf(0.2) };
        h *= fac.clamp(0.2, 5.0);
    }
    y
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (p, grid) = random_setup(&mut rng, 1);
        let m = rng.random_range(0.1..5.0);
        let lambda = rng.random_range(0.05..5.0);
        let c = rng.random_range(0.0..3.0);
        let params = ModelParams::new(m, lambda, 1.0).unwrap();
        let beta = p.beta();
        let model = Kinetic::new(&params, &p, &grid).unwrap();
        let u0 = DensityField::constant(grid, c).unwrap();
        let traj = model.solve(&u0, 1.0, 1e-3, 1.0).unwrap();
        let exact = scalar_oracle(|u| lambda - m * u * (-beta * u).exp(), c, 1.0);
        worst = worst.max(traj.last().values.iter().map(|v| (v - exact).abs()).fold(0.0, f64::max));
    }
    outcome(worst < 1e-8, format!("max sup-error at t = 1: {worst:.2e} < 1e-8"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut all, mut worst_hi, mut worst_inv) = (true, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..20 {
        let (p, grid) = random_setup(&mut rng, if i % 4 == 3 { 2 } else { 1 });
        let params = random_subcritical(&mut rng, p.beta());
        let eq = equilibria(&params, p.beta()).unwrap();
        let (k1, k2) = (eq.kappa1.unwrap(), eq.kappa2.unwrap());
        let f = random_smooth_field(&grid, rng.random());
        let u0 = DensityField::new(grid.clone(), f.iter().map(|s| k2 * 0.5 * (1.0 + s)).collect(), 0.0).unwrap();
        let r = check_bounded_regime(&params, &p, &u0, 10.0, None).unwrap();
        all &= r.passed();
        worst_hi = worst_hi.max(r.checks[0].measured - k2);
        let c = rng.random_range(k1..k2);
        let g = random_smooth_field(&grid, rng.random());
        let v0 = DensityField::new(grid, g.iter().map(|s| k1 + (c - k1) * 0.5 * (1.0 + s)).collect(), 0.0).unwrap();
        let r = check_bounded_regime(&params, &p, &v0, 10.0, Some(c)).unwrap();
        all &= r.passed() && r.checks.len() == 4;
        worst_inv = worst_inv.max(k1 - r.checks[2].measured).max(r.checks[3].measured - c);
    }
    outcome(all, format!("max(u_t) − κ₂ = {worst_hi:.2e}, worst [κ₁, c] excursion {worst_inv:.2e}, tolerance 1e-6"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut all, mut worst) = (true, f64::NEG_INFINITY);
    for i in 0..20 {
        let (p, grid) = random_setup(&mut rng, if i % 4 == 3 { 2 } else { 1 });
        let params = random_subcritical(&mut rng, p.beta());
        let k2 = equilibria(&params, p.beta()).unwrap().kappa2.unwrap();
        let f = random_smooth_field(&grid, rng.random());
        let g = random_smooth_field(&grid, rng.random());
        let high: Vec<f64> = f.iter().map(|s| k2 * 0.5 * (1.0 + s)).collect();
        let low: Vec<f64> = high.iter().zip(&g).map(|(h, s)| h * 0.5 * (1.0 + s)).collect();
        let high = DensityField::new(grid.clone(), high, 0.0).unwrap();
        let low = DensityField::new(grid, low, 0.0).unwrap();
        let r = check_comparison(&params, &p, &low, &high, 10.0).unwrap();
        all &= r.passed();
        worst = worst.max(r.checks[0].measured);
    }
    outcome(all, format!("max (u_low − u_high) = {worst:.2e} ≤ 1e-6"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut diff, mut ratio, mut margin) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let (p, grid) = random_setup(&mut rng, 1);
        let params = random_subcritical(&mut rng, p.beta());
        let eq = equilibria(&params, p.beta()).unwrap();
        let (k1, k2) = (eq.kappa1.unwrap(), eq.kappa2.unwrap());
        let c = rng.random_range(k1..=k2);
        let f = random_smooth_field(&grid, rng.random());
        let u0 = DensityField::new(grid.clone(), f.iter().map(|s| c * 0.5 * (1.0 + s)).collect(), 0.0).unwrap();
        let window = contraction_window(&params, p.beta(), c);
        let sol = solve_picard(&params, &p, &u0, c, 1e-12, window).unwrap();
        ratio = ratio.max(sol.max_ratio());
        margin = margin.max(sol.contraction_margin);
        let model = Kinetic::new(&params, &p, &grid).unwrap();
        let mut rk = model.stepper();
        let mut u = u0.values.clone();
        let mut t = 0.0;
        for (k, &tk) in sol.field.times.iter().enumerate() {
            if tk > t {
                let dt = (tk - t) / 8.0;
                rk.advance(&mut u, &mut t, tk, dt).unwrap();
            }
            let d = u.iter().zip(&sol.field.values[k]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            diff = diff.max(d);
        }
    }
    outcome(
        diff < 1e-4 && ratio <= 0.6 && margin <= 0.5 + 1e-12,
        format!("sup |Picard − MOL| = {diff:.2e} < 1e-4, max ratio {ratio:.3} ≤ 0.6, margin {margin:.3} ≤ 1/2"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut all, mut growth, mut decay) = (true, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let (p, grid) = random_setup(&mut rng, 1);
        let params = random_subcritical(&mut rng, p.beta());
        let k1 = equilibria(&params, p.beta()).unwrap().kappa1.unwrap();
        let run = check_stability(&params, &p, &grid, 0.05 * k1, rng.random(), None).unwrap();
        all &= run.report.passed();
        let peak = run.deviations.iter().map(|d| d.1).fold(0.0, f64::max);
        growth = growth.max(peak / run.initial_deviation);
        decay = decay.max(run.final_deviation / run.initial_deviation);
    }
    outcome(all, format!("max growth {growth:.3} ≤ 2, final/initial {decay:.2e} ≤ 0.1"))
}

fn criterion_7() -> Outcome {
    let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let p = Potential::indicator_box(1, 0.5, 1.0).unwrap();
    let region = RegionSupport::interval(4.0).unwrap();
    let b = 1.1 * front_bhat(&params).unwrap();
    let cert = make_certificate(&params, &p, &region, b, 2.0).unwrap();
    let grid = DomainGrid::centered(1, 64.0, 1024).unwrap();
    let u0 = DensityField::from_fn(grid, |x| if region.contains(x) { 1.5 * b } else { 1.0 }).unwrap();
    let trace = front_trace(&params, &p, &u0, &cert, &[], 20.0, 0.05).unwrap();
    let r = trace.growth_report(&params, &cert, 20.0);
    let detail = r.checks.iter().map(|c| format!("{} {:.2e}", c.name, c.measured)).collect::<Vec<_>>().join("; ");
    outcome(cert.valid && r.passed(), format!("certificate valid: {}; {detail}", cert.valid))
}

fn criterion_8() -> Outcome {
    let params = ModelParams::new(1.0, 0.3, 1.0).unwrap();
    let p = Potential::indicator_box(1, 0.5, 1.0).unwrap();
    let a = 4.0;
    let region = RegionSupport::interval(a).unwrap();
    let b = 1.1 * front_bhat(&params).unwrap();
    let cert = make_certificate(&params, &p, &region, b, 2.0).unwrap();
    let k1 = equilibria(&params, p.beta()).unwrap().kappa1.unwrap();
    let probes: Vec<f64> = (1..=12).map(|j| a + j as f64).collect();
    let predictor = FrontPredictor::new(&params, b, a, a + 12.0).unwrap();
    let mut coefs = Vec::new();
    let mut bound_ok = true;
    let mut worst = 0.0f64;
    for n in [2048, 4096] {
        let grid = DomainGrid::centered(1, 128.0, n).unwrap();
        let u0 = DensityField::from_fn(grid, |x| if region.contains(x) { 1.5 * b } else { k1 }).unwrap();
        let horizon = 1.1 * predictor.time(a + 12.0).unwrap();
        let trace = front_trace(&params, &p, &u0, &cert, &probes, horizon, 0.5).unwrap();
        let fit = fit_front(&trace, |x| predictor.time(x).unwrap()).unwrap();
        bound_ok &= fit.report.passed();
        worst = worst.max(fit.report.checks[0].measured);
        coefs.push(fit.coef_xlogx);
    }
    let stable = (coefs[1] / coefs[0] - 1.0).abs() <= 0.2;
    let positive = coefs.iter().all(|&c| c > 0.0);
    outcome(
        bound_ok && stable && positive,
        format!(
            "max t_level/prediction {worst:.3} ≤ 1.05; |x|ln|x| coefficient {:.3} (n=2048), {:.3} (n=4096), positive and within ±20%",
            coefs[0], coefs[1]
        ),
    )
}

fn criterion_9() -> Outcome {
    let (mut asym_ok, mut forms) = (true, 0.0f64);
    let mut parts = Vec::new();
    for mu in [0.0f64, -1.0, 1.0] {
        let params = ModelParams::new(1.0, 16.0 * mu.exp(), 1.0).unwrap();
        let d0 = 2.0 * front_bhat(&params).unwrap();
        let seq = recurrence(&params, d0, 10_000).unwrap();
        let rep = asymptotic_check(&seq).unwrap();
        asym_ok &= rep.report.passed();
        let agree = compare_forms(&params, d0, 10_000).unwrap();
        forms = forms.max(agree.max_step_difference).max(agree.max_sequence_difference);
        parts.push(format!("μ={mu}: e_K/4={:.3}, e_K/2={:.3}, e_K={:.3}", rep.e_quarter, rep.e_half, rep.e_full));
    }
    outcome(
        asym_ok && forms <= 1e-10,
        format!(
            "{} (limit 0.05·ln K = {:.3}, decreasing); form agreement {forms:.2e} ≤ 1e-10",
            parts.join("; "),
            0.05 * (10_000f64).ln()
        ),
    )
}

fn criterion_10() -> Outcome {
    let params = ModelParams::new(1.0, 2.0, 1.0).unwrap();
    let p = Potential::zero(1, 0.5).unwrap();
    let regions = [(0.0, 10.0), (2.5, 5.0)];
    let replicas = 1000;
    let mut counts = vec![Vec::with_capacity(replicas); regions.len()];
    for r in 0..replicas as u64 {
        let mut s = SimState::from_positions(&params, &p, 10.0, 0.0, &[], 10_000 + r).unwrap();
        let out = s.run(20.0, &[20.0]).unwrap();
        let snap = &out.snapshots[0];
        for (k, &(lo, hi)) in regions.iter().enumerate() {
            counts[k].push(snap.positions.iter().filter(|x| x[0] >= lo && x[0] < hi).count() as f64);
        }
    }
    let n = replicas as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, &(lo, hi)) in regions.iter().enumerate() {
        let mu = 2.0 * (hi - lo);
        let mean = counts[k].iter().sum::<f64>() / n;
        let var = counts[k].iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Poisson: Var(mean) = μ/n, Var(s²) ≈ (μ + 2μ²)/n.
        let (zm, zv) = ((mean - mu) / (mu / n).sqrt(), (var - mu) / ((mu + 2.0 * mu * mu) / n).sqrt());
        ok &= zm.abs() <= 4.0 && zv.abs() <= 4.0;
        parts.push(format!("[{lo}, {hi}): mean {mean:.3} (z {zm:.2}), var {var:.3} (z {zv:.2}) vs {mu}"));
    }
    outcome(ok, format!("{}; limit 4σ", parts.join("; ")))
}

fn criteria_11_12() -> (Outcome, Outcome) {
    let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let p = Potential::indicator_box(1, 0.5, 1.0).unwrap();
    let grid = DomainGrid::new(1, 10.0, 128, 0.0).unwrap();
    let u0 =
        DensityField::from_fn(grid, |x| 0.5 + 1.5 * (1.0 - ((x[0] - 5.0) / 2.0).powi(2)).max(0.0).powi(2)).unwrap();
    let opts = CompareOptions {
        eps_list: vec![1.0, 0.5, 0.25],
        t_end: 1.0,
        replicas: 256,
        base_seed: 0,
        density_bins: 16,
        pair_width: 0.5,
        pair_bins: 8,
    };
    let cmp = micro_meso_compare(&params, &p, &u0, &opts).unwrap();
    let checks = &cmp.report.checks;
    let discs: Vec<String> = cmp.results.iter().map(|r| format!("{:.4} (ε={})", r.discrepancy, r.eps)).collect();
    let c11 = outcome(
        checks[0].passed && checks[1].passed && checks[2].passed,
        format!("max |k1 − u_t|/stderr at ε=1/4: {:.2} ≤ 3; discrepancy {}", checks[0].measured, discs.join(", ")),
    );
    let c12 = outcome(
        checks[3].passed,
        format!("max |ratio − 1|/stderr beyond the first shell at ε=1/4: {:.2} ≤ 3", checks[3].measured),
    );
    (c11, c12)
}

fn criterion_13() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut formula, mut bound_ok, mut order_ok) = (0.0f64, true, true);
    for _ in 0..1000 {
        let lambda = log_uniform(&mut rng, 0.01, 10.0);
        let c_phi = log_uniform(&mut rng, 0.01, 5.0);
        let beta = c_phi * rng.random_range(1.0..3.0);
        let c0 = log_uniform(&mut rng, 0.05, 5.0);
        let c = c0 * rng.random_range(1.0..4.0);
        let params = ModelParams::new(1.0, lambda, 1.0).unwrap();
        let h = existence_horizon(&params, c_phi, beta, c0, c).unwrap();
        let t = c0 * (c - c0) / (c.powi(2) * ((c * c_phi).exp() + lambda / c0));
        let t1 = c0 * (c - c0) / (c.powi(2) * ((beta * c).exp() + lambda / c0));
        formula =
            formula.max((h.t - t).abs() / t.max(f64::MIN_POSITIVE)).max((h.t1 - t1).abs() / t1.max(f64::MIN_POSITIVE));
        bound_ok &= h.t <= 1.0 / (1.0 + 2.0 * (lambda * c_phi).sqrt()) && h.bound_holds;
        order_ok &= h.t1 <= h.t;
    }
    outcome(
        formula <= 1e-14 && bound_ok && order_ok,
        format!("relative formula mismatch {formula:.1e}; T ≤ (1+2√(λC_φ))⁻¹: {bound_ok}; T1 ≤ T: {order_ok}"),
    )
}

fn main() {
    type Runner = fn() -> Outcome;
    let single: [(u32, &str, Runner, u64); 11] = [
        (1, "Equilibrium & threshold suite", criterion_1, 5),
        (2, "Scalar-oracle equivalence", criterion_2, 30),
        (3, "Boundedness", criterion_3, 120),
        (4, "Comparison principle", criterion_4, 120),
        (5, "Picard↔MOL cross-validation", criterion_5, 120),
        (6, "Stability", criterion_6, 120),
        (7, "Aggregation growth", criterion_7, 60),
        (8, "Front form", criterion_8, 300),
        (9, "Recurrence asymptotics", criterion_9, 10),
        (10, "Independent birth-death baseline", criterion_10, 120),
        (13, "Horizon formulas", criterion_13, 1),
    ];
    let mut rows: Vec<(u32, String, Outcome, Duration, u64)> = Vec::new();
    for (id, name, f, budget) in single {
        let start = Instant::now();
        let o = f();
        rows.push((id, name.to_string(), o, start.elapsed(), budget));
    }
    let start = Instant::now();
    let (c11, c12) = criteria_11_12();
    let shared = start.elapsed();
    rows.push((11, "Micro↔meso convergence".into(), c11, shared, 1200));
    rows.push((12, "Chaos factorization".into(), c12, shared, 1200));
    rows.sort_by_key(|r| r.0);

    let mut unexpected = 0;
    for (id, name, o, elapsed, budget) in &rows {
        let in_time = elapsed.as_secs_f64() <= *budget as f64;
        let passed = o.passed && in_time;
        let expected_fail = EXPECTED_FAILURES.contains(id);
        let tag = match (passed, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (true, true) => "PASS (unexpected)",
            (false, false) => "FAIL",
        };
        if passed == expected_fail {
            unexpected += 1;
        }
        println!("{tag} [{id:>2}] {name}: {} [{:.2} s / {budget} s]", o.detail, elapsed.as_secs_f64());
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria differ from the expected outcome");
        std::process::exit(1);
    }
}
