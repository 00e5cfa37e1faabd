//! Front-expansion recurrences for the box kernel in one dimension.
//!
//! With `φ = 1_{[−1/2, 1/2]}` and a region `A = [−a, a]` where the density
//! exceeds a threshold, the front advances in steps of `1/4`. The levels
//! `d_k` reached on successive segments satisfy
//!
//! ```text
//! d_k·e^{−d_k/4} = (λ/4m)·e^{−d_{k−1}/4},     t_k = (2/λ)(d_k − d_{k−1}),
//! ```
//!
//! or, with `c_k = d_k/4` and `μ = ln(λ/16m)`, `c_k − ln c_k + μ = c_{k−1}`,
//! whose larger root is `c_k = −W₋₁(−e^{μ − c_{k−1}})`. The reference
//! asymptote is `k ln k + k ln ln k − (μ + 1)k`.

use std::path::Path;

use serde::Serialize;

use crate::equilibria::ModelParams;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_csv};
use crate::lambert::{lambert_w, lambert_w_negative_log, Branch};
use crate::meso::FrontTrace;
use crate::report::{Check, Report};
use crate::roots::{larger_root_log, larger_root_scaled};

/// Front advance per recurrence step.
pub const STEP: f64 = 0.25;
/// Relative slack on the measured-versus-predicted upper bound.
pub const FRONT_SLACK: f64 = 0.05;
const INV_E: f64 = 0.367_879_441_171_442_33;

/// `b̂`: larger root of `b·e^{−b/4} = λ/(4m)` when `λ ≤ 16m/e`. Above that
/// threshold the equation has no root, and the smallest admissible value is
/// used that keeps the recurrence well defined and increasing:
/// `max{4, 4·ln(λe/16m) + 10⁻⁶, λ/(4m) + 10⁻⁶}`.
pub fn front_bhat(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let y = params.lambda / (4.0 * params.m);
    if y / 4.0 <= INV_E {
        larger_root_scaled(0.25, y)
    } else {
        let ln_ratio = (params.lambda / (16.0 * params.m)).ln() + 1.0;
        Ok((4.0f64).max(4.0 * ln_ratio + 1e-6).max(y + 1e-6))
    }
}

/// `μ = ln(λ/16m)`.
pub fn mu(params: &ModelParams) -> f64 {
    (params.lambda / (16.0 * params.m)).ln()
}

/// `k ln k + k ln ln k − (μ + 1)k`, defined for `k ≥ 2`.
pub fn asymptote(k: usize, mu: f64) -> f64 {
    let kf = k as f64;
    if k < 2 {
        return f64::NAN;
    }
    let lk = kf.ln();
    kf * lk + kf * lk.ln() - (mu + 1.0) * kf
}

/// Which equivalent form of the recurrence is solved at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Bracketed bisection on `r·e^{−r} = (λ/16m)·e^{−c_{k−1}}`, `r = d/4`.
    Root,
    /// Newton on `c − ln c = c_{k−1} − μ`.
    Log,
    /// `c_k = −W₋₁(−e^{μ − c_{k−1}})`.
    Lambert,
}

/// One step `c_{k−1} ↦ c_k` in the requested form.
pub fn step(form: Form, mu: f64, c_prev: f64) -> Result<f64> {
    let ln_arg = mu - c_prev;
    if !(ln_arg <= -1.0) {
        return Err(Error::Regime(format!(
            "recurrence undefined: μ − c_(k−1) = {ln_arg} > −1 (argument outside the W₋₁ domain)"
        )));
    }
    match form {
        Form::Lambert => Ok(-lambert_w_negative_log(ln_arg)?),
        // Root form with r = d/4 substituted: r·e^{−r} = e^{μ − c_(k−1)}.
        Form::Root => Ok(larger_root_log(ln_arg)?),
        Form::Log => Ok(newton_log_form(c_prev - mu)),
    }
}

/// Larger root of `c − ln c = y` (y ≥ 1) by Newton from `y + ln y`.
fn newton_log_form(y: f64) -> f64 {
    let mut c = (y + y.ln()).max(1.0 + (2.0 * (y - 1.0)).sqrt());
    for _ in 0..100 {
        let f = c - c.ln() - y;
        let df = 1.0 - 1.0 / c;
        if df <= 0.0 {
            break;
        }
        let next = (c - f / df).max(1.0);
        let done = (next - c).abs() <= 2.0 * f64::EPSILON * c;
        c = next;
        if done {
            break;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceSequence {
    pub mu: f64,
    pub lambda: f64,
    pub m: f64,
    pub form: Form,
    pub d_seq: Vec<f64>,
    pub c_seq: Vec<f64>,
    /// `t_1 … t_K`.
    pub t_seq: Vec<f64>,
}

impl RecurrenceSequence {
    pub fn len(&self) -> usize {
        self.c_seq.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn asymptote(&self, k: usize) -> f64 {
        asymptote(k, self.mu)
    }

    pub fn error(&self, k: usize) -> f64 {
        self.c_seq[k] - self.asymptote(k)
    }

    /// Largest `|c_k − ln c_k + μ − c_{k−1}|` relative to `max(1, c_k)`.
    pub fn max_log_residual(&self) -> f64 {
        self.c_seq.windows(2).map(|w| (w[1] - w[1].ln() + self.mu - w[0]).abs() / w[1].max(1.0)).fold(0.0, f64::max)
    }

    /// Largest relative residual of `d_k·e^{−d_k/4} = (λ/4m)·e^{−d_{k−1}/4}`,
    /// evaluated in logarithms so that it stays finite for large `d_k`.
    pub fn max_root_residual(&self) -> f64 {
        let ln_y = (self.lambda / (4.0 * self.m)).ln();
        self.d_seq.windows(2).map(|w| (w[1].ln() - w[1] / 4.0 - ln_y + w[0] / 4.0).abs()).fold(0.0, f64::max)
    }

    /// Cumulative time `(2/λ)(d_k − d_0)`.
    pub fn cumulative_time(&self, k: usize) -> f64 {
        2.0 / self.lambda * (self.d_seq[k] - self.d_seq[0])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = (0..=self.len()).map(|k| {
            let opt = |v: f64| if v.is_finite() { fmt_f64(v) } else { String::new() };
            vec![
                k.to_string(),
                fmt_f64(self.d_seq[k]),
                fmt_f64(self.c_seq[k]),
                if k == 0 { String::new() } else { fmt_f64(self.t_seq[k - 1]) },
                opt(self.asymptote(k)),
                opt(self.error(k)),
            ]
        });
        write_csv(path, &["k", "d_k", "c_k", "t_k", "asymptote", "error"], rows)
    }
}

/// Runs the recurrence from `d0` for `K` steps using `W₋₁`.
pub fn recurrence(params: &ModelParams, d0: f64, k_max: usize) -> Result<RecurrenceSequence> {
    recurrence_with(Form::Lambert, params, d0, k_max)
}

pub fn recurrence_with(form: Form, params: &ModelParams, d0: f64, k_max: usize) -> Result<RecurrenceSequence> {
    params.validate()?;
    if k_max == 0 {
        return Err(Error::Configuration("recurrence needs K ≥ 1".into()));
    }
    let bh = front_bhat(params)?;
    if !(d0 > bh) {
        return Err(Error::Regime(format!("d0 = {d0} must exceed b̂ = {bh}")));
    }
    let mu = mu(params);
    let mut c_seq = Vec::with_capacity(k_max + 1);
    c_seq.push(d0 / 4.0);
    for k in 1..=k_max {
        let c = step(form, mu, c_seq[k - 1])?;
        if !(c > c_seq[k - 1]) {
            return Err(Error::Regime(format!("recurrence stopped increasing at k = {k}")));
        }
        c_seq.push(c);
    }
    let d_seq: Vec<f64> = c_seq.iter().map(|c| 4.0 * c).collect();
    let t_seq = d_seq.windows(2).map(|w| 2.0 / params.lambda * (w[1] - w[0])).collect();
    Ok(RecurrenceSequence { mu, lambda: params.lambda, m: params.m, form, d_seq, c_seq, t_seq })
}

/// Agreement of the three forms: per-step (same input `c_{k−1}`) and over the
/// whole sequence, both as relative differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormAgreement {
    pub max_step_difference: f64,
    pub max_sequence_difference: f64,
}

pub fn compare_forms(params: &ModelParams, d0: f64, k_max: usize) -> Result<FormAgreement> {
    let lam = recurrence_with(Form::Lambert, params, d0, k_max)?;
    let root = recurrence_with(Form::Root, params, d0, k_max)?;
    let log = recurrence_with(Form::Log, params, d0, k_max)?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let mut step_diff = 0.0f64;
    for w in lam.c_seq.windows(2) {
        let r = step(Form::Root, lam.mu, w[0])?;
        let l = step(Form::Log, lam.mu, w[0])?;
        step_diff = step_diff.max(rel(r, w[1])).max(rel(l, w[1]));
    }
    let mut seq_diff = 0.0f64;
    for k in 0..=k_max {
        seq_diff = seq_diff.max(rel(root.c_seq[k], lam.c_seq[k])).max(rel(log.c_seq[k], lam.c_seq[k]));
    }
    Ok(FormAgreement { max_step_difference: step_diff, max_sequence_difference: seq_diff })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub k: usize,
    pub e_quarter: f64,
    pub e_half: f64,
    pub e_full: f64,
    /// `c_K / (K ln K)`.
    pub leading_ratio: f64,
    /// Whether `|e_k|` is nonincreasing over the last quartile of `k`.
    pub last_quartile_monotone: bool,
    pub report: Report,
}

pub fn asymptotic_check(seq: &RecurrenceSequence) -> Result<AsymptoticReport> {
    let k = seq.len();
    if k < 100 {
        return Err(Error::InsufficientData(format!("asymptotic check needs K ≥ 100, got {k}")));
    }
    let (eq, eh, ef) = (seq.error(k / 4), seq.error(k / 2), seq.error(k));
    let leading = seq.c_seq[k] / (k as f64 * (k as f64).ln());
    let start = (3 * k) / 4;
    let monotone = (start + 1..=k).all(|j| seq.error(j).abs() <= seq.error(j - 1).abs());
    let mut report = Report::default();
    report.push(Check::at_most("|e_K| < |e_(K/2)|", ef.abs() - eh.abs(), 0.0));
    report.push(Check::at_most("|e_(K/2)| < |e_(K/4)|", eh.abs() - eq.abs(), 0.0));
    report.push(Check::at_most("|e_K| < 0.05·ln K", ef.abs(), 0.05 * (k as f64).ln()));
    Ok(AsymptoticReport {
        k,
        e_quarter: eq,
        e_half: eh,
        e_full: ef,
        leading_ratio: leading,
        last_quartile_monotone: monotone,
        report,
    })
}

/// `k(x) = ⌈(|x| − a)/(1/4)⌉`, zero inside `[−a, a]`.
pub fn steps_to(x: f64, a: f64) -> usize {
    let excess = x.abs() - a;
    if excess <= 0.0 {
        0
    } else {
        (excess / STEP).ceil() as usize
    }
}

/// Upper bound on the arrival time at `x`: `(2/λ)(d_{k(x)} − d₀)`.
#[derive(Debug, Clone)]
pub struct FrontPredictor {
    pub a: f64,
    pub seq: RecurrenceSequence,
}

impl FrontPredictor {
    /// Precomputes the recurrence far enough to cover `|x| ≤ x_max`.
    pub fn new(params: &ModelParams, d0: f64, a: f64, x_max: f64) -> Result<Self> {
        let k = steps_to(x_max, a).max(1);
        Ok(Self { a, seq: recurrence(params, d0, k)? })
    }

    pub fn time(&self, x: f64) -> Result<f64> {
        let k = steps_to(x, self.a);
        if k > self.seq.len() {
            return Err(Error::Configuration(format!("x = {x} is beyond the precomputed range")));
        }
        Ok(self.seq.cumulative_time(k))
    }
}

pub fn predicted_front_time(params: &ModelParams, d0: f64, a: f64, x: f64) -> Result<f64> {
    FrontPredictor::new(params, d0, a, x)?.time(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontFit {
    pub probes: Vec<f64>,
    pub measured: Vec<Option<f64>>,
    pub predicted: Vec<f64>,
    /// Coefficients of `t ≈ A·|x|ln|x| + B·|x|`.
    pub coef_xlogx: f64,
    pub coef_x: f64,
    pub report: Report,
}

/// Checks `t_level(x) ≤ 1.05·prediction(x)` at every probe and fits the
/// measured times by least squares on `|x|ln|x|` and `|x|`.
pub fn fit_front<F: Fn(f64) -> f64>(measured: &FrontTrace, predicted: F) -> Result<FrontFit> {
    let crossed: Vec<(f64, f64)> =
        measured.probes.iter().zip(&measured.t_level).filter_map(|(x, t)| t.map(|t| (*x, t))).collect();
    if measured.probes.len() < 4 || crossed.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "front fit needs at least 4 probes with a crossing, got {}",
            crossed.len()
        )));
    }
    let predicted_times: Vec<f64> = measured.probes.iter().map(|&x| predicted(x)).collect();
    let mut worst = f64::NEG_INFINITY;
    for ((t, &p), _) in measured.t_level.iter().zip(&predicted_times).zip(&measured.probes) {
        let ratio = match t {
            Some(t) => t / p.max(f64::MIN_POSITIVE),
            // Never reached the level: a violation if the run outlasted the bound.
            None if measured.t_final > p * (1.0 + FRONT_SLACK) => measured.t_final / p,
            None => continue,
        };
        worst = worst.max(ratio);
    }
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, t) in &crossed {
        let ax = x.abs();
        let f1 = ax * ax.ln();
        let f2 = ax;
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        r1 += f1 * t;
        r2 += f2 * t;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 {
        return Err(Error::InsufficientData("probe positions do not separate |x|ln|x| from |x|".into()));
    }
    let a = (r1 * s22 - r2 * s12) / det;
    let b = (s11 * r2 - s12 * r1) / det;
    let mut report = Report::default();
    report.push(Check::at_most("max t_level / prediction", worst, 1.0 + FRONT_SLACK));
    Ok(FrontFit {
        probes: measured.probes.clone(),
        measured: measured.t_level.clone(),
        predicted: predicted_times,
        coef_xlogx: a,
        coef_x: b,
        report,
    })
}

/// `b(x) = Θ_x⁻¹(θ)`: the larger root of `b·e^{−s_x b} = (λ/m)·θ`.
pub fn theta_x_inverse(params: &ModelParams, s_x: f64, theta: f64) -> Result<f64> {
    if !(s_x > 0.0) {
        return Err(Error::Domain(format!("s_x must be positive, got {s_x}")));
    }
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("θ must be positive, got {theta}")));
    }
    let z = s_x * params.lam_over_m() * theta;
    if z > INV_E {
        return Err(Error::Domain(format!("θ = {theta} outside the range of Θ_x (s_x·(λ/m)·θ = {z} > 1/e)")));
    }
    Ok(-lambert_w(Branch::Negative, -z)? / s_x)
}

/// Off-region arrival estimate `t(x) = (b(x) − b)/v`.
pub fn off_region_time(params: &ModelParams, s_x: f64, theta: f64, b: f64, v: f64) -> Result<f64> {
    Ok((theta_x_inverse(params, s_x, theta)? - b) / v)
}
