//! Real branches of the Lambert W function.
//!
//! Halley iteration from branch-specific seeds: the branch-point series in
//! `p = ±√(2(1 + e·x))` near `−1/e`, the Taylor series near zero, and the
//! `ln x − ln ln x` asymptote away from both. Once `|w| > 1` the iteration runs
//! on the log form `w + ln|w| = ln|x|`, which never evaluates `e^w` and so
//! stays finite over the whole `f64` range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const INV_E: f64 = 0.367_879_441_171_442_33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `W₀`, increasing on `[−1/e, ∞)`, values `≥ −1`.
    Principal,
    /// `W₋₁`, decreasing on `[−1/e, 0)`, values `≤ −1`.
    Negative,
}

pub fn lambert_w(branch: Branch, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("Lambert W of NaN".into()));
    }
    // Distance to the branch point, computed without cancellation in e·x.
    let offset = x + INV_E;
    if offset < -1e-17 {
        return Err(Error::Domain(format!("Lambert W argument {x} below the branch point −1/e")));
    }
    if offset <= 0.0 {
        return Ok(-1.0);
    }
    match branch {
        Branch::Principal => {
            if x == 0.0 {
                return Ok(0.0);
            }
            if x.is_infinite() {
                return Ok(f64::INFINITY);
            }
            Ok(principal(x, offset))
        }
        Branch::Negative => {
            if x >= 0.0 {
                return Err(Error::Domain(format!("negative branch needs x in [−1/e, 0), got {x}")));
            }
            Ok(negative(x, offset))
        }
    }
}

/// `W₋₁(−e^{ln_neg_x})`, for arguments whose magnitude may underflow.
/// Requires `ln_neg_x ≤ −1`.
pub fn lambert_w_negative_log(ln_neg_x: f64) -> Result<f64> {
    if ln_neg_x.is_nan() || ln_neg_x > -1.0 + 1e-15 {
        if (ln_neg_x + 1.0).abs() <= 1e-15 {
            return Ok(-1.0);
        }
        return Err(Error::Domain(format!("negative branch needs ln|x| ≤ −1, got {ln_neg_x}")));
    }
    if ln_neg_x > -40.0 {
        return lambert_w(Branch::Negative, -ln_neg_x.exp());
    }
    let l2 = (-ln_neg_x).ln();
    let seed = ln_neg_x - l2 + l2 / ln_neg_x;
    Ok(halley_log(seed, ln_neg_x))
}

fn principal(x: f64, offset: f64) -> f64 {
    let seed = if offset < 0.15 {
        let p = (2.0 * std::f64::consts::E * offset).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x.abs() < 0.25 {
        x - x * x + 1.5 * x * x * x
    } else if x < 3.0 {
        (1.0 + x).ln() * 0.8
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    if x > std::f64::consts::E {
        halley_log(seed.max(1.0), x.ln())
    } else {
        halley_direct(seed, x)
    }
}

fn negative(x: f64, offset: f64) -> f64 {
    if offset < 0.15 {
        let p = -(2.0 * std::f64::consts::E * offset).sqrt();
        let seed = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
        halley_direct(seed, x)
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        let seed = (l1 - l2 + l2 / l1).min(-1.0 - 1e-3);
        halley_log(seed, l1)
    }
}

/// Halley on `f(w) = w·e^w − x`.
fn halley_direct(mut w: f64, x: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        w = next;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(1.0) {
            break;
        }
    }
    w
}

/// Halley on `g(w) = w + ln|w| − ln|x|`, valid away from `w = −1` and `w = 0`.
fn halley_log(mut w: f64, ln_abs_x: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let g = w + w.abs().ln() - ln_abs_x;
        if g == 0.0 {
            break;
        }
        let g1 = 1.0 + 1.0 / w;
        let g2 = -1.0 / (w * w);
        let denom = 2.0 * g1 * g1 - g * g2;
        if denom == 0.0 {
            break;
        }
        let step = 2.0 * g * g1 / denom;
        let next = w - step;
        // Stay on the branch's side of −1 (negative) or 0 (principal).
        w = if w < -1.0 && next > -1.0 {
            0.5 * (w - 1.0)
        } else if w > 0.0 && next <= 0.0 {
            0.5 * w
        } else {
            next
        };
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(1.0) {
            break;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(w: f64, x: f64) -> f64 {
        (w * w.exp() - x).abs()
    }

    #[test]
    fn named_values() {
        assert_eq!(lambert_w(Branch::Principal, 0.0).unwrap(), 0.0);
        let w = lambert_w(Branch::Principal, std::f64::consts::E).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
        assert_eq!(lambert_w(Branch::Negative, -INV_E).unwrap(), -1.0);
        assert_eq!(lambert_w(Branch::Principal, -INV_E).unwrap(), -1.0);
    }

    #[test]
    fn omega_constant() {
        let w = lambert_w(Branch::Principal, 1.0).unwrap();
        assert!((w - 0.567_143_290_409_783_8).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(lambert_w(Branch::Principal, -0.5).is_err());
        assert!(lambert_w(Branch::Negative, 0.0).is_err());
        assert!(lambert_w(Branch::Negative, 0.3).is_err());
        assert!(lambert_w(Branch::Negative, -0.4).is_err());
        assert!(lambert_w(Branch::Principal, f64::NAN).is_err());
    }

    #[test]
    fn near_branch_point() {
        for k in 1..=15 {
            let x = -INV_E + 10f64.powi(-k);
            let w0 = lambert_w(Branch::Principal, x).unwrap();
            let w1 = lambert_w(Branch::Negative, x).unwrap();
            assert!(w0 >= -1.0 && w1 <= -1.0, "{k}: {w0} {w1}");
            assert!(residual(w0, x) < 1e-15 && residual(w1, x) < 1e-15);
        }
    }

    #[test]
    fn log_argument_matches_direct() {
        for &l in &[-1.5, -5.0, -39.0, -41.0, -60.0] {
            let a = lambert_w_negative_log(l).unwrap();
            let b = lambert_w(Branch::Negative, -l.exp()).unwrap();
            assert!((a - b).abs() < 1e-12 * b.abs(), "{l}: {a} {b}");
        }
        let w = lambert_w_negative_log(-1.0e5).unwrap();
        assert!((w + (-w).ln() + 1.0e5).abs() < 1e-9);
    }

    #[test]
    fn huge_principal_argument() {
        let w = lambert_w(Branch::Principal, 1e300).unwrap();
        assert!((w + w.ln() - 1e300f64.ln()).abs() < 1e-12);
    }
}
