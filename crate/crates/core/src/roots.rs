//! Bracketed solvers for `r·e^{−r} = y`, the shape shared by the stationary
//! equation, the threshold equations and the front recurrence.
//!
//! Both roots are found by bisection to a relative width of 1e−12 followed by a
//! single Newton polish. The larger root is solved in log form
//! `r − ln r = −ln y`, which keeps it usable when `y` underflows.

use crate::error::{Error, Result};

const REL_WIDTH: f64 = 1e-12;
const MAX_BISECT: usize = 400;

/// Larger root `r ≥ 1` of `r·e^{−r} = y`, with `y` given as `ln y`.
pub fn larger_root_log(ln_y: f64) -> Result<f64> {
    let target = -ln_y;
    if !target.is_finite() || target < 1.0 - 1e-15 {
        return Err(Error::Domain(format!("r·e^(−r) = e^{ln_y} has no real root (needs ln y ≤ −1)")));
    }
    if target <= 1.0 {
        return Ok(1.0);
    }
    let g = |r: f64| r - r.ln() - target;
    let mut lo = 1.0_f64;
    let mut hi = 2.0_f64.max(target);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..MAX_BISECT {
        if hi - lo <= REL_WIDTH * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut r = 0.5 * (lo + hi);
    let slope = 1.0 - 1.0 / r;
    if slope > 1e-8 {
        r -= g(r) / slope;
    }
    Ok(r)
}

/// Larger root `r ≥ 1` of `r·e^{−r} = y`, `0 < y ≤ 1/e`.
pub fn larger_root(y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("larger root needs y > 0, got {y}")));
    }
    larger_root_log(y.ln())
}

/// Smaller root `0 < r ≤ 1` of `r·e^{−r} = y`, `0 < y ≤ 1/e`.
pub fn smaller_root(y: f64) -> Result<f64> {
    if !(y > 0.0) || y > (-1.0f64).exp() * (1.0 + 1e-15) {
        return Err(Error::Domain(format!("r·e^(−r) = {y} has no root in (0, 1]")));
    }
    let ln_y = y.ln();
    let h = |r: f64| r.ln() - r - ln_y;
    if h(1.0) <= 0.0 {
        return Ok(1.0);
    }
    let mut lo = 0.5_f64;
    while h(lo) >= 0.0 {
        lo *= 0.5;
    }
    let mut hi = 1.0_f64;
    for _ in 0..MAX_BISECT {
        if hi - lo <= REL_WIDTH * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut r = 0.5 * (lo + hi);
    let slope = 1.0 / r - 1.0;
    if slope > 1e-8 {
        r -= h(r) / slope;
    }
    Ok(r)
}

/// Larger root `b` of `b·e^{−s·b} = y` for `s > 0`.
pub fn larger_root_scaled(s: f64, y: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {s}")));
    }
    Ok(larger_root(s * y)? / s)
}
