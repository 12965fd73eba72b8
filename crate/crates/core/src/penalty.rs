//! Penalty functions: BerHu, adaptive BerHu with concomitant scale, and the
//! lasso / ridge / elastic-net comparison penalties.
//!
//! The adaptive BerHu penalty is
//!
//! ```text
//! P(beta, tau) = tau * ( sum_j 1/w_j + sum_j w_j B_L(beta_j / tau) )   tau > 0
//!              = 0                                                     beta = 0, tau = 0
//!              = +inf                                                  beta != 0, tau = 0
//! ```
//!
//! with `B_L(z) = |z|` for `|z| <= L` and `(z^2 + L^2) / (2L)` otherwise.
//! Minimizing over `tau` has an exact solution found by scanning the
//! breakpoints `|beta_j| / L`.

use nalgebra::DVector;

use crate::error::{param, Error, Result};

#[inline]
pub(crate) fn bh(z: f64, l: f64) -> f64 {
    let a = z.abs();
    if a <= l {
        a
    } else {
        (z * z + l * l) / (2.0 * l)
    }
}

/// B_L(z) - z B_L'(z): `0` in the linear zone, `(L^2 - z^2) / (2L)` beyond it.
#[inline]
pub(crate) fn bh_conjugate_term(z: f64, l: f64) -> f64 {
    let a = z.abs();
    if a <= l {
        0.0
    } else {
        (l * l - z * z) / (2.0 * l)
    }
}

fn check_l(l: f64) -> Result<()> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(param("L", format!("must be positive and finite, got {l}")))
    }
}

/// The BerHu (reversed Huber) function.
pub fn berhu(z: f64, l: f64) -> Result<f64> {
    check_l(l)?;
    Ok(bh(z, l))
}

/// Derivative of the BerHu function away from zero.
///
/// At `z = 0` the subdifferential is `[-1, 1]`; callers must handle that case.
pub fn berhu_derivative(z: f64, l: f64) -> Result<f64> {
    check_l(l)?;
    if z == 0.0 {
        return Err(Error::Domain(
            "BerHu derivative is undefined at 0 (subdifferential [-1, 1])".into(),
        ));
    }
    Ok(if z.abs() <= l { z.signum() } else { z / l })
}

/// Gap between `B_L(z)` and its variational form
/// `min_{w >= max(L, |z|)} w^2/(2L) - w + |z| + L/2`, evaluated at the
/// closed-form minimizer `w = max(L, |z|)`.
pub fn berhu_variational_gap(z: f64, l: f64) -> f64 {
    let w = l.max(z.abs());
    let var = w * w / (2.0 * l) - w + z.abs() + l / 2.0;
    (var - bh(z, l)).abs()
}

/// Result of minimizing the adaptive BerHu penalty over its scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyProfile {
    /// `min_tau P(beta, tau)`.
    pub value: f64,
    pub tau_hat: f64,
    /// Count boundary: one more than the number of quadratically penalized
    /// coefficients. Reported only for equal weights and nonzero `beta`.
    pub q: Option<usize>,
    /// Indices with `|beta_j| >= L tau_hat` (boundary inclusive).
    pub quad_set: Vec<usize>,
    /// Nonzero indices penalized in the l1 zone.
    pub linear_set: Vec<usize>,
}

/// `P(beta, tau)` with the case split at `tau = 0`.
pub fn adaptive_berhu_value(beta: &DVector<f64>, weights: &DVector<f64>, l: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return if beta.iter().all(|b| *b == 0.0) {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let inv_sum: f64 = weights.iter().map(|w| 1.0 / w).sum();
    let body: f64 = beta
        .iter()
        .zip(weights.iter())
        .map(|(b, w)| w * tau * bh(b / tau, l))
        .sum();
    tau * inv_sum + body
}

/// Derivative of `tau -> P(beta, tau)` divided by nothing: the score
/// `sum 1/w_j + sum w_j [B(beta_j/tau) - (beta_j/tau) B'(beta_j/tau)]`.
pub fn tau_stationarity(beta: &DVector<f64>, weights: &DVector<f64>, l: f64, tau: f64) -> f64 {
    let inv_sum: f64 = weights.iter().map(|w| 1.0 / w).sum();
    let rest: f64 = beta
        .iter()
        .zip(weights.iter())
        .map(|(b, w)| w * bh_conjugate_term(b / tau, l))
        .sum();
    inv_sum + rest
}

/// Exact minimizer of `tau -> P(beta, tau)` by breakpoint scan. Returns `tau_hat`.
pub(crate) fn concomitant_tau(beta: &[f64], weights: &[f64], l: f64, inv_sum: f64) -> f64 {
    let mut items: Vec<(f64, f64, f64)> = beta
        .iter()
        .zip(weights)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, w)| (b.abs() / l, *w, w * b * b))
        .collect();
    if items.is_empty() {
        return 0.0;
    }
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut wsum = 0.0;
    let mut qsum = 0.0;
    for i in 0..items.len() {
        wsum += items[i].1;
        qsum += items[i].2;
        let next = items.get(i + 1).map_or(0.0, |it| it.0);
        if next == items[i].0 {
            continue;
        }
        let tau = (qsum / (2.0 * l * inv_sum + l * l * wsum)).sqrt();
        if tau >= next {
            return tau.min(items[i].0);
        }
    }
    // unreachable in exact arithmetic: the last interval always contains the root
    let last = items.len() - 1;
    (qsum / (2.0 * l * inv_sum + l * l * wsum)).sqrt().min(items[last].0)
}

/// Minimizes the adaptive BerHu penalty over its concomitant scale.
pub fn adaptive_berhu_concomitant(
    beta: &DVector<f64>,
    weights: &DVector<f64>,
    l: f64,
) -> Result<PenaltyProfile> {
    check_l(l)?;
    if weights.len() != beta.len() {
        return Err(Error::Shape {
            expected: format!("{} weights", beta.len()),
            found: format!("{}", weights.len()),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(param("weights", format!("must be in (0, inf), got {w}")));
    }
    let inv_sum: f64 = weights.iter().map(|w| 1.0 / w).sum();
    let tau_hat = concomitant_tau(beta.as_slice(), weights.as_slice(), l, inv_sum);
    if tau_hat == 0.0 {
        return Ok(PenaltyProfile {
            value: 0.0,
            tau_hat: 0.0,
            q: None,
            quad_set: Vec::new(),
            linear_set: Vec::new(),
        });
    }
    let boundary = l * tau_hat;
    let mut quad_set = Vec::new();
    let mut linear_set = Vec::new();
    for (j, b) in beta.iter().enumerate() {
        if b.abs() >= boundary {
            quad_set.push(j);
        } else if *b != 0.0 {
            linear_set.push(j);
        }
    }
    let equal = weights.iter().all(|w| *w == weights[0]);
    Ok(PenaltyProfile {
        value: adaptive_berhu_value(beta, weights, l, tau_hat),
        tau_hat,
        q: equal.then(|| quad_set.len() + 1),
        quad_set,
        linear_set,
    })
}

/// Unit-weight concomitant BerHu penalty via the sorted closed form
/// `sqrt(2p/L + q - 1) * ||top q-1||_2 + sum of the remaining |beta_(j)|`.
///
/// Computed independently of [`adaptive_berhu_concomitant`]: every admissible
/// count boundary `q` is tried and the one satisfying the interval condition
/// `|beta_(q)|/L <= tau <= |beta_(q-1)|/L` is kept.
pub fn pen_closed_form(beta: &DVector<f64>, l: f64) -> Result<f64> {
    check_l(l)?;
    let p = beta.len() as f64;
    let mut abs: Vec<f64> = beta.iter().map(|b| b.abs()).filter(|b| *b > 0.0).collect();
    if abs.is_empty() {
        return Ok(0.0);
    }
    abs.sort_by(|a, b| b.total_cmp(a));
    let k = abs.len();
    let mut best: Option<(f64, usize)> = None;
    for q in 2..=k + 1 {
        let top: f64 = abs[..q - 1].iter().map(|b| b * b).sum();
        let tau = (top / (2.0 * l * p + l * l * (q - 1) as f64)).sqrt();
        let upper = abs[q - 2] / l;
        let lower = if q - 1 < k { abs[q - 1] / l } else { 0.0 };
        let violation = (lower - tau).max(0.0) + (tau - upper).max(0.0);
        if best.is_none_or(|(v, _)| violation < v) {
            best = Some((violation, q));
        }
    }
    let q = best.map(|(_, q)| q).unwrap_or(2);
    let top: f64 = abs[..q - 1].iter().map(|b| b * b).sum();
    let tail: f64 = abs[q - 1..].iter().sum();
    Ok((2.0 * p / l + (q - 1) as f64).sqrt() * top.sqrt() + tail)
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `argmin_b (b - v)^2 / 2 + step * weight * tau * B_L(b / tau)`.
///
/// Soft thresholding in the l1 zone, proportional shrinkage beyond `L tau`.
pub fn berhu_prox(v: f64, step: f64, weight: f64, l: f64, tau: f64) -> f64 {
    let t = step * weight;
    let edge = l * tau;
    if v.abs() <= edge + t {
        soft_threshold(v, t)
    } else {
        v / (1.0 + t / edge)
    }
}

pub fn ridge_value(beta: &DVector<f64>, lambda: f64) -> f64 {
    lambda * beta.norm_squared()
}

pub fn lasso_value(beta: &DVector<f64>, lambda: f64, weights: &DVector<f64>) -> f64 {
    lambda
        * beta
            .iter()
            .zip(weights.iter())
            .map(|(b, w)| w * b.abs())
            .sum::<f64>()
}

pub fn enet_value(beta: &DVector<f64>, lambda1: f64, lambda2: f64, weights: &DVector<f64>) -> f64 {
    lasso_value(beta, lambda1, weights) + ridge_value(beta, lambda2)
}
