//! One recipe per experiment. Each parses its `settings`, validates every
//! input before the expensive part starts, writes its artifacts and returns
//! the checks it evaluated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aggrokin_core::aggregation::{
    asymptotic_check, compare_forms, fit_front, front_bhat, recurrence, FrontPredictor, FRONT_SLACK,
};
use aggrokin_core::equilibria::{equilibria, existence_horizon, make_certificate, ModelParams, Regime};
use aggrokin_core::grid::{DensityField, DomainGrid};
use aggrokin_core::io::{fmt_f64, write_csv, write_json};
use aggrokin_core::meso::checks::{BOUND_TOL, ORDER_TOL};
use aggrokin_core::meso::picard::contraction_window;
use aggrokin_core::meso::{
    check_bounded_regime, check_comparison, check_stability, front_trace, solve_picard, Kinetic, POSITIVITY_TOL,
};
use aggrokin_core::micro::experiments::Z_LIMIT;
use aggrokin_core::micro::sim::AUDIT_TOL;
use aggrokin_core::micro::{
    estimate_density, fluctuation_growth_demo, init_poisson_capped, micro_meso_compare, write_snapshots,
    CompareOptions, DemoOptions, RunStatus, SnapshotManifest, Torus, MIN_REPLICAS, POPULATION_CAP,
};
use aggrokin_core::potential::{Potential, RegionSupport};
use aggrokin_core::report::{Check, Report};
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig, InitialCondition};

const RESIDUAL_TOL: f64 = 1e-10;
const PICARD_MOL_TOL: f64 = 1e-4;
const CONTRACTION_RATIO_LIMIT: f64 = 0.6;
const CONTRACTION_MARGIN: f64 = 0.5;
const FORM_AGREEMENT_TOL: f64 = 1e-10;
const FIT_STABILITY: f64 = 0.2;

/// Everything a recipe produced besides the files themselves.
#[derive(Debug, Default)]
pub struct Outcome {
    pub report: Report,
    pub tolerances: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

pub struct RunContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub base_dir: &'a Path,
    pub out_dir: &'a Path,
    pub seed: u64,
}

impl Outcome {
    fn tol(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.to_string(), value);
    }

    fn output(&mut self, cx: &RunContext, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        cx.out_dir.join(name)
    }

    /// Records a CSV written together with its `.json` sidecar.
    fn output_with_sidecar(&mut self, cx: &RunContext, name: &str) -> PathBuf {
        let p = self.output(cx, name);
        self.outputs.push(Path::new(name).with_extension("json").to_string_lossy().into_owned());
        p
    }

    fn extend_prefixed(&mut self, prefix: &str, report: Report) {
        for mut c in report.checks {
            c.name = format!("{prefix}{}", c.name);
            self.report.push(c);
        }
    }
}

pub fn run(experiment: Experiment, cx: &RunContext) -> Result<Outcome> {
    cx.cfg.params.validate().context("params")?;
    let mut out = Outcome::default();
    match experiment {
        Experiment::Equilibria => equilibria_recipe(cx, &mut out),
        Experiment::MesoRun => meso_run(cx, &mut out),
        Experiment::PicardRun => picard_run(cx, &mut out),
        Experiment::BoundedCheck => bounded_check(cx, &mut out),
        Experiment::ComparisonCheck => comparison_check(cx, &mut out),
        Experiment::StabilityCheck => stability_check(cx, &mut out),
        Experiment::AggregationRun => aggregation_run(cx, &mut out),
        Experiment::FrontFit => front_fit(cx, &mut out),
        Experiment::Recurrence => recurrence_recipe(cx, &mut out),
        Experiment::MicroRun => micro_run(cx, &mut out),
        Experiment::MicroMesoCompare => micro_meso(cx, &mut out),
        Experiment::FluctuationDemo => fluctuation_demo(cx, &mut out),
        Experiment::Horizon => horizon(cx, &mut out),
    }?;
    Ok(out)
}

/// Potential, grid and initial field, with the resolution contract checked.
fn meso_setup(cx: &RunContext) -> Result<(Potential, DomainGrid, DensityField)> {
    let p = cx.cfg.potential(cx.base_dir)?;
    let grid = cx.cfg.grid()?;
    grid.check_resolution(&p).context("grid")?;
    let u0 = cx.cfg.initial()?.build(&grid, cx.base_dir)?;
    Ok((p, grid, u0))
}

fn subcritical(params: &ModelParams, beta: f64) -> Result<(f64, f64)> {
    let eq = equilibria(params, beta).context("equilibria")?;
    match (eq.regime, eq.kappa1, eq.kappa2) {
        (Regime::Supercritical, _, _) => {
            bail!("equilibria: λβ/m = {} exceeds 1/e; the regulated regime is required", eq.threshold)
        }
        (_, Some(k1), Some(k2)) => Ok((k1, k2)),
        _ => unreachable!("non-supercritical regimes carry both roots"),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquilibriaSettings {
    #[serde(default)]
    certificate: Option<CertificateSettings>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateSettings {
    region: RegionSupport,
    b: f64,
    kappa: f64,
}

fn equilibria_recipe(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: EquilibriaSettings = cx.cfg.settings()?;
    let params = &cx.cfg.params;
    let potential = match &cx.cfg.potential {
        Some(_) => Some(cx.cfg.potential(cx.base_dir)?),
        None => None,
    };
    let beta = match (cx.cfg.beta, &potential) {
        (Some(_), Some(_)) => bail!("config: give either `beta` or `potential`, not both"),
        (Some(b), None) => b,
        (None, Some(p)) => p.beta(),
        (None, None) => bail!("config: `beta` or `potential` is required"),
    };
    let pair = equilibria(params, beta).context("equilibria")?;
    out.tol("residual", RESIDUAL_TOL);
    match (pair.kappa1, pair.kappa2) {
        (Some(k1), Some(k2)) => {
            out.report.push(Check::at_most("|residual(κ₁)|", pair.residual1.unwrap_or(f64::NAN), RESIDUAL_TOL));
            out.report.push(Check::at_most("|residual(κ₂)|", pair.residual2.unwrap_or(f64::NAN), RESIDUAL_TOL));
            out.report.push(Check::flag("κ₁ ≤ 1/β ≤ κ₂", k1 <= 1.0 / beta && 1.0 / beta <= k2));
        }
        _ => out.report.push(Check::flag("no equilibria above the threshold", pair.regime == Regime::Supercritical)),
    }
    let certificate = match s.certificate {
        Some(c) => {
            let p = potential.as_ref().ok_or_else(|| anyhow!("settings.certificate: needs `potential`"))?;
            let cert = make_certificate(params, p, &c.region, c.b, c.kappa).context("equilibria: certificate")?;
            out.report.push(Check::flag("certificate valid", cert.valid));
            Some(cert)
        }
        None => None,
    };
    let summary = json!({ "beta": beta, "equilibria": pair, "certificate": certificate });
    write_json(out.output(cx, "equilibria.json"), &summary)?;
    out.summary = summary;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MesoRunSettings {
    t_end: f64,
    #[serde(default)]
    dt: Option<f64>,
    report_every: f64,
}

fn meso_run(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: MesoRunSettings = cx.cfg.settings()?;
    let (p, grid, u0) = meso_setup(cx)?;
    let params = &cx.cfg.params;
    let model = Kinetic::new(params, &p, &grid).context("meso_solver")?;
    let dt = s.dt.unwrap_or_else(|| model.default_dt());
    let traj = model.solve(&u0, s.t_end, dt, s.report_every).context("meso_solver: method of lines")?;
    traj.write(&out.output_with_sidecar(cx, "trajectory.csv"), params, &p.spec())?;
    out.tol("positivity", POSITIVITY_TOL);
    out.report.push(Check::at_least("min u_t ≥ 0", traj.min_value, -POSITIVITY_TOL));
    let beta = p.beta();
    let mut kappa2 = None;
    if beta > 0.0 {
        if let Ok((_, k2)) = subcritical(params, beta) {
            if u0.min() >= 0.0 && u0.max() <= k2 {
                out.tol("bound", BOUND_TOL);
                out.report.push(Check::at_most("max u_t ≤ κ₂", traj.max_value, k2 + BOUND_TOL));
                kappa2 = Some(k2);
            }
        }
    }
    let last = traj.last();
    out.summary = json!({
        "dt": dt,
        "t_final": last.time,
        "min_value": traj.min_value,
        "max_value": traj.max_value,
        "final_mass": last.mass(),
        "kappa2": kappa2,
    });
    Ok(())
}

fn default_picard_tol() -> f64 {
    1e-10
}

fn default_substeps() -> usize {
    8
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PicardSettings {
    c: f64,
    t_end: f64,
    #[serde(default = "default_picard_tol")]
    tol: f64,
    #[serde(default = "default_true")]
    compare_mol: bool,
    /// RK4 steps per Picard time node in the comparison run.
    #[serde(default = "default_substeps")]
    mol_substeps: usize,
}

fn picard_run(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: PicardSettings = cx.cfg.settings()?;
    if s.mol_substeps == 0 {
        bail!("config: `settings.mol_substeps` must be at least 1");
    }
    let (p, grid, u0) = meso_setup(cx)?;
    let params = &cx.cfg.params;
    let sol = solve_picard(params, &p, &u0, s.c, s.tol, s.t_end).context("meso_solver: Picard iteration")?;
    let f = &sol.field;
    let g = &grid;
    let rows = f.times.iter().zip(&f.values).flat_map(|(t, v)| {
        v.iter().enumerate().map(move |(idx, x)| {
            let ij = g.unflatten(idx);
            let mut row = vec![fmt_f64(*t), ij[0].to_string()];
            if g.dim == 2 {
                row.push(ij[1].to_string());
            }
            row.push(fmt_f64(*x));
            row
        })
    });
    let header: &[&str] = if grid.dim == 1 { &["t", "i", "value"] } else { &["t", "i", "j", "value"] };
    write_csv(out.output(cx, "picard.csv"), header, rows)?;
    let wrows = sol.windows.iter().map(|w| {
        vec![fmt_f64(w.start), fmt_f64(w.length), w.sweeps.to_string(), fmt_f64(w.max_ratio), fmt_f64(w.final_change)]
    });
    write_csv(out.output(cx, "windows.csv"), &["start", "length", "sweeps", "max_ratio", "final_change"], wrows)?;

    out.tol("picard_tol", s.tol);
    out.tol("contraction_margin", CONTRACTION_MARGIN);
    out.tol("contraction_ratio", CONTRACTION_RATIO_LIMIT);
    out.report.push(Check::at_most("contraction margin", sol.contraction_margin, CONTRACTION_MARGIN + 1e-12));
    out.report.push(Check::at_most("max contraction ratio", sol.max_ratio(), CONTRACTION_RATIO_LIMIT));
    let mut mol_diff = None;
    if s.compare_mol {
        let model = Kinetic::new(params, &p, &grid).context("meso_solver")?;
        let mut rk = model.stepper();
        let mut u = u0.values.clone();
        let mut t = u0.time;
        let mut diff = 0.0f64;
        for (tk, vk) in f.times.iter().zip(&f.values) {
            if *tk > t {
                let dt = (tk - t) / s.mol_substeps as f64;
                rk.advance(&mut u, &mut t, *tk, dt).context("meso_solver: method of lines")?;
            }
            diff = diff.max(u.iter().zip(vk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        out.tol("picard_mol", PICARD_MOL_TOL);
        out.report.push(Check::at_most("sup |Picard − MOL|", diff, PICARD_MOL_TOL));
        mol_diff = Some(diff);
    }
    out.summary = json!({
        "window_length": contraction_window(params, p.beta(), s.c),
        "contraction_margin": sol.contraction_margin,
        "max_ratio": sol.max_ratio(),
        "windows": sol.windows,
        "mol_difference": mol_diff,
    });
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundedSettings {
    t_end: f64,
    #[serde(default)]
    invariant_c: Option<f64>,
}

fn bounded_check(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: BoundedSettings = cx.cfg.settings()?;
    let (p, _, u0) = meso_setup(cx)?;
    let (k1, k2) = subcritical(&cx.cfg.params, p.beta())?;
    let report =
        check_bounded_regime(&cx.cfg.params, &p, &u0, s.t_end, s.invariant_c).context("meso_solver: bounded regime")?;
    out.tol("bound", BOUND_TOL);
    out.tol("positivity", POSITIVITY_TOL);
    out.report.extend(report);
    out.summary = json!({ "kappa1": k1, "kappa2": k2, "u0_min": u0.min(), "u0_max": u0.max() });
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComparisonSettings {
    upper: InitialCondition,
    t_end: f64,
}

fn comparison_check(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: ComparisonSettings = cx.cfg.settings()?;
    let (p, grid, low) = meso_setup(cx)?;
    let high = s.upper.build(&grid, cx.base_dir).context("settings.upper")?;
    let report = check_comparison(&cx.cfg.params, &p, &low, &high, s.t_end).context("meso_solver: comparison")?;
    out.tol("order", ORDER_TOL);
    out.report.extend(report);
    out.summary = json!({ "t_end": s.t_end });
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StabilitySettings {
    amplitude: f64,
    #[serde(default)]
    t_end: Option<f64>,
}

fn stability_check(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: StabilitySettings = cx.cfg.settings()?;
    let p = cx.cfg.potential(cx.base_dir)?;
    let grid = cx.cfg.grid()?;
    grid.check_resolution(&p).context("grid")?;
    let run =
        check_stability(&cx.cfg.params, &p, &grid, s.amplitude, cx.seed, s.t_end).context("meso_solver: stability")?;
    let rows = run.deviations.iter().map(|(t, d)| vec![fmt_f64(*t), fmt_f64(*d)]);
    write_csv(out.output(cx, "deviations.csv"), &["t", "deviation"], rows)?;
    out.tol("growth_factor", 2.0);
    out.tol("decay_fraction", 0.1);
    out.report.extend(run.report);
    out.summary = json!({
        "initial_deviation": run.initial_deviation,
        "final_deviation": run.final_deviation,
        "t_final": run.deviations.last().map(|d| d.0),
    });
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregationSettings {
    region: RegionSupport,
    b: f64,
    kappa: f64,
    t_end: f64,
    report_every: f64,
    #[serde(default)]
    probes: Vec<f64>,
}

fn aggregation_run(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: AggregationSettings = cx.cfg.settings()?;
    let (p, _, u0) = meso_setup(cx)?;
    let params = &cx.cfg.params;
    let cert = make_certificate(params, &p, &s.region, s.b, s.kappa).context("equilibria: certificate")?;
    if let Some(v) = &cert.violation {
        bail!("aggregation-run: certificate rejected: {v}");
    }
    let trace = front_trace(params, &p, &u0, &cert, &s.probes, s.t_end, s.report_every)
        .context("aggregation-run: refusing to run")?;
    write_json(out.output(cx, "certificate.json"), &cert)?;
    trace.write_csv(&out.output(cx, "front.csv"))?;
    let rows = trace
        .growth
        .iter()
        .map(|g| [g.t, g.udot_min, g.udot_max, g.u_min, g.u_max].iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>());
    write_csv(out.output(cx, "growth.csv"), &["t", "udot_min", "udot_max", "u_min", "u_max"], rows)?;
    out.tol("growth_slack_per_unit", 1e-6);
    out.report.extend(trace.growth_report(params, &cert, s.t_end));
    out.summary = json!({ "certificate": cert, "t_final": trace.t_final, "level": trace.level });
    Ok(())
}

fn default_horizon_factor() -> f64 {
    1.1
}

fn default_front_report() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrontFitSettings {
    /// Half-width `a` of the seeded interval `[−a, a]`.
    half_width: f64,
    b: f64,
    kappa: f64,
    probes: Vec<f64>,
    /// Cell counts to repeat the run at; defaults to the configured grid.
    #[serde(default)]
    resolutions: Vec<usize>,
    /// The run lasts this multiple of the predicted arrival at the farthest probe.
    #[serde(default = "default_horizon_factor")]
    horizon_factor: f64,
    #[serde(default = "default_front_report")]
    report_every: f64,
    /// Starting value of the recurrence; defaults to `b`.
    #[serde(default)]
    d0: Option<f64>,
}

fn front_fit(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: FrontFitSettings = cx.cfg.settings()?;
    let p = cx.cfg.potential(cx.base_dir)?;
    let base = cx.cfg.grid()?;
    let initial = cx.cfg.initial()?;
    let params = &cx.cfg.params;
    let region = RegionSupport::interval(s.half_width).context("settings.half_width")?;
    let cert = make_certificate(params, &p, &region, s.b, s.kappa).context("equilibria: certificate")?;
    if let Some(v) = &cert.violation {
        bail!("front-fit: certificate rejected: {v}");
    }
    let x_max = s.probes.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let predictor =
        FrontPredictor::new(params, s.d0.unwrap_or(s.b), s.half_width, x_max).context("aggregation: recurrence")?;
    let horizon = s.horizon_factor * predictor.time(x_max)?;
    let resolutions = if s.resolutions.is_empty() { vec![base.n] } else { s.resolutions.clone() };
    let mut setups = Vec::new();
    for &n in &resolutions {
        let grid = DomainGrid::new(base.dim, base.length, n, base.origin).context("grid")?;
        grid.check_resolution(&p).context("grid")?;
        setups.push((n, initial.build(&grid, cx.base_dir)?));
    }

    out.tol("front_slack", FRONT_SLACK);
    let mut fits = Vec::new();
    for (n, u0) in &setups {
        let trace = front_trace(params, &p, u0, &cert, &s.probes, horizon, s.report_every)
            .with_context(|| format!("front-fit: front tracing at n = {n}"))?;
        let fit = fit_front(&trace, |x| predictor.time(x).expect("probes lie within the precomputed range"))
            .with_context(|| format!("aggregation: front fit at n = {n}"))?;
        out.extend_prefixed(&format!("n={n}: "), fit.report.clone());
        out.report.push(Check::at_least(format!("n={n}: |x|ln|x| coefficient > 0"), fit.coef_xlogx, f64::MIN_POSITIVE));
        fits.push((*n, fit));
    }
    if fits.len() >= 2 {
        out.tol("coefficient_stability", FIT_STABILITY);
        let c0 = fits[0].1.coef_xlogx;
        let spread = fits.iter().map(|(_, f)| (f.coef_xlogx / c0 - 1.0).abs()).fold(0.0, f64::max);
        out.report.push(Check::at_most("|x|ln|x| coefficient spread across resolutions", spread, FIT_STABILITY));
    }

    let mut header = vec!["x".to_string(), "predicted".to_string()];
    header.extend(fits.iter().map(|(n, _)| format!("t_level_n{n}")));
    let rows = (0..s.probes.len()).map(|k| {
        let mut row = vec![fmt_f64(s.probes[k]), fmt_f64(fits[0].1.predicted[k])];
        row.extend(fits.iter().map(|(_, f)| f.measured[k].map(fmt_f64).unwrap_or_default()));
        row
    });
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(out.output(cx, "front_fit.csv"), &header_refs, rows)?;
    let summary = json!({
        "horizon": horizon,
        "certificate": cert,
        "fits": fits.iter().map(|(n, f)| json!({"n": n, "coef_xlogx": f.coef_xlogx, "coef_x": f.coef_x})).collect::<Vec<_>>(),
    });
    write_json(out.output(cx, "front_fit.json"), &summary)?;
    out.summary = summary;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecurrenceSettings {
    k_max: usize,
    /// Defaults to twice the smallest admissible starting value.
    #[serde(default)]
    d0: Option<f64>,
}

fn recurrence_recipe(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: RecurrenceSettings = cx.cfg.settings()?;
    let params = &cx.cfg.params;
    let bhat = front_bhat(params).context("aggregation")?;
    let d0 = s.d0.unwrap_or(2.0 * bhat);
    let seq = recurrence(params, d0, s.k_max).context("aggregation: recurrence")?;
    let forms = compare_forms(params, d0, s.k_max).context("aggregation: form comparison")?;
    seq.write_csv(&out.output(cx, "recurrence.csv"))?;
    out.tol("form_agreement", FORM_AGREEMENT_TOL);
    out.report.push(Check::at_most("per-step form difference", forms.max_step_difference, FORM_AGREEMENT_TOL));
    out.report.push(Check::at_most("sequence form difference", forms.max_sequence_difference, FORM_AGREEMENT_TOL));
    let asymptotics = if s.k_max >= 100 {
        let a = asymptotic_check(&seq).context("aggregation: asymptotics")?;
        out.tol("asymptote_log_factor", 0.05);
        out.report.extend(a.report.clone());
        Some(a)
    } else {
        None
    };
    let summary = json!({
        "mu": seq.mu,
        "b_hat": bhat,
        "d0": d0,
        "forms": forms,
        "max_log_residual": seq.max_log_residual(),
        "max_root_residual": seq.max_root_residual(),
        "asymptotics": asymptotics,
    });
    write_json(out.output(cx, "recurrence.json"), &summary)?;
    out.summary = summary;
    Ok(())
}

fn default_bins() -> usize {
    16
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MicroRunSettings {
    t_end: f64,
    replicas: usize,
    /// Defaults to `[t_end]`.
    #[serde(default)]
    snapshot_times: Vec<f64>,
    #[serde(default = "default_bins")]
    density_bins: usize,
    #[serde(default)]
    cap: Option<usize>,
}

fn micro_run(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: MicroRunSettings = cx.cfg.settings()?;
    let p = cx.cfg.potential(cx.base_dir)?;
    let grid = cx.cfg.grid()?;
    let u0 = cx.cfg.initial()?.build(&grid, cx.base_dir)?;
    let params = cx.cfg.params;
    if s.replicas == 0 || s.density_bins == 0 {
        bail!("config: `settings.replicas` and `settings.density_bins` must be positive");
    }
    let times = if s.snapshot_times.is_empty() { vec![s.t_end] } else { s.snapshot_times.clone() };
    let cap = s.cap.unwrap_or(POPULATION_CAP);
    let runs: Vec<_> = (0..s.replicas as u64)
        .into_par_iter()
        .map(|r| -> aggrokin_core::Result<_> {
            let mut st = init_poisson_capped(&params, &p, &u0, cx.seed + r, cap)?.with_cap(cap);
            let output = st.run(s.t_end, &times)?;
            let audit = st.audit()?;
            Ok((output, audit, st.population()))
        })
        .collect::<aggrokin_core::Result<_>>()
        .context("micro_sim")?;

    let torus = Torus { dim: grid.dim, length: grid.length, origin: grid.origin };
    let manifest = SnapshotManifest {
        params,
        potential: p.spec(),
        epsilon: params.epsilon,
        torus: torus.clone(),
        base_seed: cx.seed,
        replicas: s.replicas,
        snapshot_times: times.clone(),
    };
    let snaps: Vec<_> = runs.iter().map(|(o, _, _)| o.snapshots.clone()).collect();
    write_snapshots(&out.output_with_sidecar(cx, "snapshots.csv"), &snaps, &manifest)?;

    let capped = runs.iter().filter(|(o, _, _)| !o.completed()).count();
    let worst_audit = runs.iter().map(|(_, a, _)| *a).fold(0.0, f64::max);
    out.tol("energy_audit", AUDIT_TOL);
    out.report.push(Check::at_most("replicas stopped at the population cap", capped as f64, 0.0));
    out.report.push(Check::at_most("energy cache audit", worst_audit, AUDIT_TOL));
    let mut density = None;
    if s.replicas >= MIN_REPLICAS && capped == 0 {
        let last: Vec<_> = runs.iter().map(|(o, _, _)| o.snapshots.last().unwrap().positions.clone()).collect();
        let est = estimate_density(&last, params.epsilon, &torus, s.density_bins).context("micro_sim: estimator")?;
        est.write_csv(&out.output(cx, "density.csv"))?;
        density = Some(est.values.iter().sum::<f64>() / est.values.len() as f64);
    }
    let status: Vec<_> = runs
        .iter()
        .map(|(o, _, n)| match o.status {
            RunStatus::Completed => json!({ "status": "completed", "population": n }),
            RunStatus::CapacityExceeded { t, population } => {
                json!({ "status": "capacity-exceeded", "t": t, "population": population })
            }
        })
        .collect();
    out.summary = json!({
        "replicas": s.replicas,
        "snapshot_times": times,
        "mean_density_final": density,
        "mean_events": runs.iter().map(|(o, _, _)| o.events as f64).sum::<f64>() / s.replicas as f64,
        "runs": status,
    });
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareSettings {
    eps_list: Vec<f64>,
    t_end: f64,
    replicas: usize,
    density_bins: usize,
    pair_width: f64,
    pair_bins: usize,
}

fn micro_meso(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: CompareSettings = cx.cfg.settings()?;
    let (p, grid, u0) = meso_setup(cx)?;
    let opts = CompareOptions {
        eps_list: s.eps_list,
        t_end: s.t_end,
        replicas: s.replicas,
        base_seed: cx.seed,
        density_bins: s.density_bins,
        pair_width: s.pair_width,
        pair_bins: s.pair_bins,
    };
    let cmp = micro_meso_compare(&cx.cfg.params, &p, &u0, &opts).context("micro_sim: micro-meso comparison")?;
    for r in &cmp.results {
        let tag = fmt_f64(r.eps);
        r.density.write_csv(&out.output(cx, &format!("density_eps{tag}.csv")))?;
        r.pair.write_csv(&out.output(cx, &format!("pair_eps{tag}.csv")))?;
    }
    let rows = cmp.meso_final.iter().enumerate().map(|(i, v)| {
        let mut row: Vec<String> = grid.center(i).iter().map(|x| fmt_f64(*x)).collect();
        row.push(fmt_f64(*v));
        row
    });
    let header: &[&str] = if grid.dim == 1 { &["x1", "value"] } else { &["x1", "x2", "value"] };
    write_csv(out.output(cx, "meso_final.csv"), header, rows)?;
    out.tol("z_limit", Z_LIMIT);
    out.report.extend(cmp.report.clone());
    out.summary = json!({
        "results": cmp.results.iter().map(|r| json!({
            "eps": r.eps,
            "max_abs_z": r.max_abs_z,
            "discrepancy": r.discrepancy,
            "max_chaos_z": r.max_chaos_z,
            "mean_population": r.mean_population,
        })).collect::<Vec<_>>(),
    });
    Ok(())
}

fn default_samples() -> usize {
    21
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoSettings {
    region: RegionSupport,
    initial_count: usize,
    t_end: f64,
    replicas: usize,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    cap: Option<usize>,
}

fn fluctuation_demo(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: DemoSettings = cx.cfg.settings()?;
    let p = cx.cfg.potential(cx.base_dir)?;
    let grid = cx.cfg.grid()?;
    let opts = DemoOptions {
        length: grid.length,
        origin: grid.origin,
        t_end: s.t_end,
        samples: s.samples,
        replicas: s.replicas,
        base_seed: cx.seed,
        cap: s.cap.unwrap_or(POPULATION_CAP),
    };
    let demo = fluctuation_growth_demo(&cx.cfg.params, &p, &s.region, s.initial_count, &opts)
        .context("micro_sim: fluctuation demo")?;
    let rows = (0..demo.times.len()).map(|k| {
        [demo.times[k], demo.seeded_mean[k], demo.seeded_stderr[k], demo.empty_mean[k], demo.empty_stderr[k]]
            .iter()
            .map(|v| fmt_f64(*v))
            .collect::<Vec<_>>()
    });
    write_csv(
        out.output(cx, "fluctuation.csv"),
        &["t", "seeded_mean", "seeded_stderr", "empty_mean", "empty_stderr"],
        rows,
    )?;
    out.tol("drift_sigmas", 4.0);
    out.report.extend(demo.report.clone());
    out.summary = json!({ "capped_replicas": demo.capped_replicas, "epsilon": 1.0 });
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HorizonSettings {
    c0: f64,
    c: f64,
}

fn horizon(cx: &RunContext, out: &mut Outcome) -> Result<()> {
    let s: HorizonSettings = cx.cfg.settings()?;
    let p = cx.cfg.potential(cx.base_dir)?;
    let (c_phi, beta) = (p.c_phi(), p.beta());
    let h = existence_horizon(&cx.cfg.params, c_phi, beta, s.c0, s.c).context("equilibria: horizon")?;
    out.report.push(Check::at_most("T ≤ (1 + 2√(λ·C_φ))⁻¹", h.t, h.bound));
    let summary = json!({ "c_phi": c_phi, "beta": beta, "horizon": h });
    write_json(out.output(cx, "horizon.json"), &summary)?;
    out.summary = summary;
    Ok(())
}
