//! Exact one-dimensional minimization of convex piecewise-C1 slices.

/// Finds the root of a nondecreasing function `f` (returning value and slope)
/// on `[lo, hi]`, where either end may be infinite.
///
/// Newton steps are taken when they stay strictly inside the current bracket,
/// bisection otherwise. For piecewise-linear `f` Newton terminates exactly once
/// it reaches the right piece; for piecewise-constant `f` (slope 0) the search
/// degrades to bisection down to a bracket of width `1e-12 (1 + |x|)`.
pub(crate) fn solve_increasing<F>(mut f: F, lo: f64, hi: f64, start: f64) -> f64
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut lo, mut hi) = (lo, hi);
    let mut x = if start > lo && start < hi {
        start
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo + 1.0f64.max(lo.abs())
    } else if hi.is_finite() {
        hi - 1.0f64.max(hi.abs())
    } else {
        0.0
    };

    let (mut fx, mut dfx) = f(x);
    if fx == 0.0 {
        return x;
    }
    // make the bracket finite
    if fx < 0.0 {
        lo = x;
        if !hi.is_finite() {
            let mut step = 1.0f64.max(x.abs());
            loop {
                let t = x + step;
                let (ft, _) = f(t);
                if ft == 0.0 {
                    return t;
                }
                if ft >= 0.0 {
                    hi = t;
                    break;
                }
                lo = t;
                step *= 2.0;
                if !step.is_finite() {
                    return t;
                }
            }
        }
    } else {
        hi = x;
        if !lo.is_finite() {
            let mut step = 1.0f64.max(x.abs());
            loop {
                let t = x - step;
                let (ft, _) = f(t);
                if ft == 0.0 {
                    return t;
                }
                if ft <= 0.0 {
                    lo = t;
                    break;
                }
                hi = t;
                step *= 2.0;
                if !step.is_finite() {
                    return t;
                }
            }
        }
    }

    for _ in 0..400 {
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        if hi - lo <= 1e-12 * (1.0 + x.abs()) {
            return x;
        }
        let step = if dfx > 0.0 { fx / dfx } else { f64::NAN };
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            return x;
        }
        let mut cand = x - step;
        if !(cand > lo && cand < hi) {
            cand = 0.5 * (lo + hi);
        }
        x = cand;
        (fx, dfx) = f(x);
    }
    x
}
