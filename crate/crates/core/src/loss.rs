//! Huber function, Huber criterion with concomitant scale, least squares.

use crate::error::{param, Error, Result};

/// Huber function: `z^2` for `|z| <= M`, `2M|z| - M^2` beyond.
#[inline]
pub fn huber(z: f64, m: f64) -> f64 {
    let a = z.abs();
    if a <= m {
        z * z
    } else {
        2.0 * m * a - m * m
    }
}

/// `H_M'(z)`: `2z` in the quadratic zone, `2M sign(z)` beyond.
#[inline]
pub fn huber_derivative(z: f64, m: f64) -> f64 {
    if z.abs() <= m {
        2.0 * z
    } else {
        2.0 * m * z.signum()
    }
}

/// Gap between `H_M(z)` and its Moreau-Yosida form `min_v (z - v)^2 + 2M|v|`
/// evaluated at `v = sign(z) max(|z| - M, 0)`.
pub fn huber_variational_gap(z: f64, m: f64) -> f64 {
    let v = z.signum() * (z.abs() - m).max(0.0);
    let var = (z - v) * (z - v) + 2.0 * m * v.abs();
    (var - huber(z, m)).abs()
}

/// Huber criterion with concomitant scale for fixed residuals:
/// `n s + s sum H_M(r_i / s)` for `s > 0`, `2M sum |r_i|` at `s = 0`.
pub fn huber_criterion(residuals: &[f64], m: f64, s: f64) -> f64 {
    if s < 0.0 {
        return f64::INFINITY;
    }
    if s == 0.0 {
        return 2.0 * m * residuals.iter().map(|r| r.abs()).sum::<f64>();
    }
    let n = residuals.len() as f64;
    n * s + s * residuals.iter().map(|r| huber(r / s, m)).sum::<f64>()
}

/// Exact minimizer over `s >= 0` of the concomitant Huber criterion.
///
/// On each interval between sorted breakpoints `|r_i| / M` the stationarity
/// condition reads `s^2 = sum_small r_i^2 / (n - M^2 #large)`. When the
/// criterion is flat on an initial segment the largest minimizer is returned.
pub(crate) fn concomitant_scale(residuals: &[f64], m: f64, scratch: &mut Vec<f64>) -> f64 {
    let n = residuals.len();
    scratch.clear();
    scratch.extend(residuals.iter().map(|r| r.abs() / m));
    scratch.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let m2 = m * m;
    let mut q = 0.0;
    for k in 0..=n {
        let lo = if k == 0 { 0.0 } else { scratch[k - 1] };
        let hi = if k == n { f64::INFINITY } else { scratch[k] };
        if hi > lo || (k == 0 && hi > 0.0) {
            let d = nf - m2 * (n - k) as f64;
            if d > 0.0 {
                let s = (q / d).sqrt();
                if s <= hi {
                    return s.max(lo);
                }
            }
        }
        if k < n {
            let a = scratch[k] * m;
            q += a * a;
        }
    }
    // last interval has d = n > 0 and an unbounded right end
    unreachable!("concomitant scale scan found no interval")
}

/// Outcome of minimizing the Huber criterion over its scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub value: f64,
    pub s_hat: Option<f64>,
    pub residuals: Vec<f64>,
    /// Indices with `|r_i| <= M s`.
    pub small_set: Vec<usize>,
    pub large_set: Vec<usize>,
}

/// Minimizes `s -> L_H` for fixed residuals.
pub fn huber_concomitant(residuals: &[f64], m: f64) -> Result<LossEvaluation> {
    if residuals.is_empty() {
        return Err(Error::InvalidData("empty residual vector".into()));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(param("M", format!("must be positive and finite, got {m}")));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidData("non-finite residual".into()));
    }
    let s = concomitant_scale(residuals, m, &mut Vec::with_capacity(residuals.len()));
    let (small_set, large_set): (Vec<usize>, Vec<usize>) =
        (0..residuals.len()).partition(|&i| residuals[i].abs() <= m * s);
    Ok(LossEvaluation {
        value: huber_criterion(residuals, m, s),
        s_hat: Some(s),
        residuals: residuals.to_vec(),
        small_set,
        large_set,
    })
}

/// Residual sum of squares.
pub fn least_squares(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}
