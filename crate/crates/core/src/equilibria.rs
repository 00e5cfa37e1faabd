//! The space-homogeneous problem and growth-certificate arithmetic.
//!
//! Constant solutions of the kinetic equation satisfy `λ = m·u·e^{−βu}`. The
//! map `r ↦ r·e^{−r}` peaks at `1/e`, so there are two equilibria `κ₁ < 1/β <
//! κ₂` when `λβ/m < 1/e`, a double one at equality, and none above.
//!
//! A growth certificate for a box `A` pairs a threshold `b` with an overshoot
//! ratio `κ > 1`. With `Φ_A = inf_A s_A` and
//! `Θ(b) = (m/λ)·b·e^{−Φ_A·b}`, the certificate is valid when `b ≥ b̂`,
//! `κ > 1` and `Θ(b) < κ⁻¹(1 − κ⁻¹)`; initial data in `(b, κb)` on `A` then
//! grows at a rate of at least `v = λ(1 − κΘ(b)) > λ/κ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambert::{lambert_w, Branch};
use crate::potential::{Potential, RegionSupport};
use crate::roots::larger_root_scaled;

const INV_E: f64 = 0.367_879_441_171_442_33;
/// Relative window around `λβ/m = 1/e` treated as the double root.
const CRITICAL_REL_TOL: f64 = 1e-12;

fn default_epsilon() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub m: f64,
    pub lambda: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(m: f64, lambda: f64, epsilon: f64) -> Result<Self> {
        let p = Self { m, lambda, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::Configuration(format!("m must be positive, got {}", self.m)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Configuration(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Configuration(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn lam_over_m(&self) -> f64 {
        self.lambda / self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPair {
    /// `λβ/m`.
    pub threshold: f64,
    pub regime: Regime,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub residual1: Option<f64>,
    pub residual2: Option<f64>,
}

impl EquilibriumPair {
    /// `κ₁` when it exists, otherwise `None`.
    pub fn lower(&self) -> Option<f64> {
        self.kappa1
    }
}

/// `λ − m·κ·e^{−βκ}`.
pub fn stationary_residual(params: &ModelParams, beta: f64, kappa: f64) -> f64 {
    params.lambda - params.m * kappa * (-beta * kappa).exp()
}

pub fn equilibria(params: &ModelParams, beta: f64) -> Result<EquilibriumPair> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!("equilibria need beta > 0, got {beta}")));
    }
    let x = params.lambda * beta / params.m;
    let residual = |k: f64| stationary_residual(params, beta, k).abs();
    let (regime, k1, k2) = if (x / INV_E - 1.0).abs() <= CRITICAL_REL_TOL {
        (Regime::Critical, Some(1.0 / beta), Some(1.0 / beta))
    } else if x < INV_E {
        let k1 = -lambert_w(Branch::Principal, -x)? / beta;
        let k2 = -lambert_w(Branch::Negative, -x)? / beta;
        (Regime::Subcritical, Some(k1), Some(k2))
    } else {
        (Regime::Supercritical, None, None)
    };
    Ok(EquilibriumPair {
        threshold: x,
        regime,
        kappa1: k1,
        kappa2: k2,
        residual1: k1.map(residual),
        residual2: k2.map(residual),
    })
}

/// `b̂`: larger root of `b·e^{−Φ_A b} = λ/(4m)` when `λΦ_A/(4m) ≤ 1/e`,
/// otherwise `1/Φ_A`.
pub fn b_hat(lam_over_m: f64, phi_a: f64) -> Result<f64> {
    if !(phi_a.is_finite() && phi_a > 0.0) {
        return Err(Error::Domain(format!("b̂ needs Φ_A > 0, got {phi_a}")));
    }
    if !(lam_over_m.is_finite() && lam_over_m > 0.0) {
        return Err(Error::Domain(format!("b̂ needs λ/m > 0, got {lam_over_m}")));
    }
    let y = lam_over_m / 4.0;
    if y * phi_a <= INV_E {
        larger_root_scaled(phi_a, y)
    } else {
        Ok(1.0 / phi_a)
    }
}

fn theta_raw(lam_over_m: f64, phi_a: f64, b: f64) -> f64 {
    b * (-phi_a * b).exp() / lam_over_m
}

/// `Θ(b) = (m/λ)·b·e^{−Φ_A b}` on the admissible range `b ≥ b̂`.
pub fn theta_of_b(lam_over_m: f64, phi_a: f64, b: f64) -> Result<f64> {
    let bh = b_hat(lam_over_m, phi_a)?;
    if !(b >= bh * (1.0 - 1e-12)) {
        return Err(Error::CertificateDomain(format!("b = {b} is below b̂ = {bh}")));
    }
    Ok(theta_raw(lam_over_m, phi_a, b))
}

/// Inverse of `Θ`: the larger root of `b·e^{−Φ_A b} = (λ/m)·θ`.
pub fn theta_inverse(lam_over_m: f64, phi_a: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::CertificateDomain(format!("θ must be positive, got {theta}")));
    }
    larger_root_scaled(phi_a, lam_over_m * theta)
        .map_err(|e| Error::CertificateDomain(format!("θ = {theta} outside the range of Θ: {e}")))
}

/// `v(b, κ) = λ − κ·m·b·e^{−Φ_A b}`.
pub fn growth_speed(params: &ModelParams, phi_a: f64, b: f64, kappa: f64) -> f64 {
    params.lambda - kappa * params.m * b * (-phi_a * b).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationCertificate {
    pub region: RegionSupport,
    pub phi_a: f64,
    pub b: f64,
    pub kappa: f64,
    pub b_hat: f64,
    pub theta_of_b: f64,
    /// `κ⁻¹(1 − κ⁻¹)`, the bound `Θ(b)` must stay below.
    pub theta_bound: f64,
    pub v: f64,
    pub valid: bool,
    /// First violated clause when invalid.
    pub violation: Option<String>,
}

/// Builds a certificate from a precomputed `Φ_A`.
pub fn certificate_with_phi(
    params: &ModelParams,
    region: &RegionSupport,
    phi_a: f64,
    b: f64,
    kappa: f64,
) -> Result<AggregationCertificate> {
    let lm = params.lam_over_m();
    let bh = b_hat(lm, phi_a)?;
    let theta = theta_raw(lm, phi_a, b);
    let theta_bound = if kappa > 0.0 { (1.0 - 1.0 / kappa) / kappa } else { f64::NAN };
    let violation = if !(b >= bh) {
        Some(format!("b ≥ b̂ violated: b = {b} < b̂ = {bh}"))
    } else if !(kappa > 1.0) {
        Some(format!("κ > 1 violated: κ = {kappa}"))
    } else if !(theta < theta_bound) {
        Some(format!("Θ(b) < κ⁻¹(1 − κ⁻¹) violated: Θ(b) = {theta} ≥ {theta_bound}"))
    } else {
        None
    };
    Ok(AggregationCertificate {
        region: region.clone(),
        phi_a,
        b,
        kappa,
        b_hat: bh,
        theta_of_b: theta,
        theta_bound,
        v: growth_speed(params, phi_a, b, kappa),
        valid: violation.is_none(),
        violation,
    })
}

pub fn make_certificate(
    params: &ModelParams,
    potential: &Potential,
    region: &RegionSupport,
    b: f64,
    kappa: f64,
) -> Result<AggregationCertificate> {
    region.validate()?;
    let phi_a = potential.phi_region(region);
    if !(phi_a > 0.0) {
        return Err(Error::CertificateDomain(format!("Φ_A = {phi_a}: the kernel puts no mass inside the region")));
    }
    certificate_with_phi(params, region, phi_a, b, kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub t: f64,
    pub t1: f64,
    /// `(1 + 2√(λ·C_φ))⁻¹`.
    pub bound: f64,
    pub bound_holds: bool,
}

fn horizon_formula(lambda: f64, k: f64, c0: f64, c: f64) -> f64 {
    c0 * (c - c0) / (c * c * ((c * k).exp() + lambda / c0))
}

/// Existence horizons of the correlation evolution on the scale `C₀ ≤ C`.
pub fn existence_horizon(params: &ModelParams, c_phi: f64, beta: f64, c0: f64, c: f64) -> Result<HorizonReport> {
    if !(c0 > 0.0 && c >= c0 && c.is_finite()) {
        return Err(Error::Domain(format!("horizon needs C ≥ C₀ > 0, got C₀ = {c0}, C = {c}")));
    }
    if !(c_phi >= 0.0 && beta >= 0.0) {
        return Err(Error::Domain("C_φ and β must be nonnegative".into()));
    }
    let t = horizon_formula(params.lambda, c_phi, c0, c);
    let t1 = horizon_formula(params.lambda, beta, c0, c);
    let bound = 1.0 / (1.0 + 2.0 * (params.lambda * c_phi).sqrt());
    Ok(HorizonReport { t, t1, bound, bound_holds: t <= bound })
}
