//! Composite Simpson rules used for kernel integrals.

/// Composite Simpson on `[lo, hi]` with `intervals` subintervals (rounded up
/// to an even count).
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = (intervals.max(2) + 1) & !1;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson over `[lo, hi]` split at the given breakpoints, so that kinks of
/// the integrand fall on panel boundaries. `intervals` is the total budget.
pub fn simpson_piecewise<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, breakpoints: &[f64], intervals: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let span = hi - lo;
    cuts.windows(2)
        .map(|w| {
            let share = ((w[1] - w[0]) / span * intervals as f64).ceil() as usize;
            simpson(&f, w[0], w[1], share.max(8))
        })
        .sum()
}

/// Tensor-product Simpson over a rectangle.
pub fn simpson_2d<F: Fn(f64, f64) -> f64>(f: F, x: (f64, f64), y: (f64, f64), intervals: usize) -> f64 {
    simpson(|xv| simpson(|yv| f(xv, yv), y.0, y.1, intervals), x.0, x.1, intervals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 2);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-13);
    }

    #[test]
    fn piecewise_handles_kink() {
        let v = simpson_piecewise(|x: f64| x.abs(), -1.0, 1.0, &[0.0], 16);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(simpson(|_| 1.0, 1.0, 1.0, 10), 0.0);
    }
}
