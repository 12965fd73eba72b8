//! Stationarity diagnostics for fitted points.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{FitResult, Loss, ModelSpec, Penalty};
use crate::penalty::bh_conjugate_term;

/// Per-equation stationarity residuals of a fitted point.
///
/// Coefficient residuals are normalized by `1 + lambda w_j`; the scale
/// residual by `n`; the penalty-scale residual by `1 + lambda sum 1/w_j`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct KktReport {
    pub beta: Vec<f64>,
    pub tau: f64,
    pub scale: f64,
    pub alpha: f64,
    pub max_residual: f64,
}

/// Loss derivative contribution of one residual: `(psi(r), d psi / d r)`, where
/// the loss gradient in `beta_j` is `-sum_i x_ij psi(r_i)`.
#[inline]
pub(crate) fn psi(loss: Loss, s: f64, r: f64) -> (f64, f64) {
    match loss {
        Loss::LeastSquares => (2.0 * r, 2.0),
        Loss::Huber { m } => {
            if s > 0.0 {
                let z = r / s;
                if z.abs() <= m {
                    (2.0 * z, 2.0 / s)
                } else {
                    (2.0 * m * z.signum(), 0.0)
                }
            } else if r == 0.0 {
                (0.0, 0.0)
            } else {
                (2.0 * m * r.signum(), 0.0)
            }
        }
    }
}

/// Gradient and curvature of the smooth part of the penalty at `b` for coordinate `j`
/// (the part left after removing `lambda w_j |b|`).
#[inline]
pub(crate) fn smooth_penalty_derivative(pen: &Penalty, j: usize, b: f64, tau: f64) -> (f64, f64) {
    match pen {
        Penalty::None | Penalty::AdaptiveLasso { .. } => (0.0, 0.0),
        Penalty::Ridge { lambda } => (2.0 * lambda * b, 2.0 * lambda),
        Penalty::AdaptiveElasticNet { lambda2, .. } => (2.0 * lambda2 * b, 2.0 * lambda2),
        Penalty::AdaptiveBerHu { lambda, l, weights } => {
            let edge = l * tau;
            if tau > 0.0 && b.abs() > edge {
                let c = lambda * weights[j];
                (c * (b / edge - b.signum()), c / edge)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

/// Optimality margin of the block `(beta, tau) = (0, 0)` for a BerHu penalty,
/// given the loss gradient `g` at `beta = 0`. Nonnegative iff zero is optimal.
pub(crate) fn zero_block_margin(g: &[f64], lambda: f64, l: f64, weights: &DVector<f64>) -> f64 {
    let inv_sum: f64 = weights.iter().map(|w| 1.0 / w).sum();
    let mut margin = lambda * inv_sum;
    for (gj, w) in g.iter().zip(weights.iter()) {
        let lw = lambda * w;
        if gj.abs() > lw {
            margin += lw * l / 2.0 - gj * gj * l / (2.0 * lw);
        }
    }
    margin
}

pub(crate) fn loss_gradient(x: &DMatrix<f64>, loss: Loss, s: f64, r: &[f64]) -> Vec<f64> {
    let psi_r: Vec<f64> = r.iter().map(|ri| psi(loss, s, *ri).0).collect();
    x.column_iter()
        .map(|col| -col.iter().zip(&psi_r).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// At the least-absolute-deviation boundary (`M s` negligible against the
/// residuals) the Huber loss is `2M sum |r_i|`, whose subgradient at a zero
/// residual is any `u_i` in `[-2M, 2M]`. Picks those multipliers to best
/// satisfy the equality conditions (intercept and nonzero coefficients) by
/// box-constrained least squares. Returns the full multiplier vector and the
/// number of zero residuals, or `None` off the boundary.
#[allow(clippy::too_many_arguments)]
fn lad_multipliers(
    x: &DMatrix<f64>,
    loss: Loss,
    pen: &Penalty,
    r: &[f64],
    beta: &[f64],
    s: f64,
    tau: f64,
    berhu_zero: bool,
) -> Option<(Vec<f64>, usize)> {
    let Loss::Huber { m } = loss else {
        return None;
    };
    let rmax = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-9 * (1.0 + rmax);
    if m * s > tol {
        return None;
    }
    let zero: Vec<usize> = (0..r.len()).filter(|&i| r[i].abs() <= tol).collect();
    let mut u: Vec<f64> = r
        .iter()
        .map(|ri| if ri.abs() <= tol { 0.0 } else { 2.0 * m * ri.signum() })
        .collect();
    if zero.is_empty() {
        return Some((u, 0));
    }
    // rows: intercept, then each nonzero coefficient; row k reads sum_i a_ki u_i = b_k
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let fixed = |w: &dyn Fn(usize) -> f64| -> f64 {
        (0..r.len())
            .filter(|i| r[*i].abs() > tol)
            .map(|i| w(i) * u[i])
            .sum()
    };
    rows.push((vec![1.0; zero.len()], -fixed(&|_| 1.0)));
    if !berhu_zero {
        for (j, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let (smooth, _) = smooth_penalty_derivative(pen, j, b, tau);
            let l1 = pen.l1_level(j);
            let norm = 1.0 + l1;
            let a: Vec<f64> = zero.iter().map(|&i| x[(i, j)] / norm).collect();
            let rhs = (smooth + l1 * b.signum() - fixed(&|i| x[(i, j)])) / norm;
            rows.push((a, rhs));
        }
    }
    let bound = 2.0 * m;
    let mut v = vec![0.0; zero.len()];
    let mut res: Vec<f64> = rows.iter().map(|(_, b)| -b).collect();
    let col_sq: Vec<f64> = (0..zero.len())
        .map(|c| rows.iter().map(|(a, _)| a[c] * a[c]).sum())
        .collect();
    for _ in 0..5000 {
        let mut moved = 0.0f64;
        for c in 0..zero.len() {
            if col_sq[c] == 0.0 {
                continue;
            }
            let grad: f64 = rows.iter().zip(&res).map(|((a, _), e)| a[c] * e).sum();
            let new = (v[c] - grad / col_sq[c]).clamp(-bound, bound);
            let d = new - v[c];
            if d != 0.0 {
                for ((a, _), e) in rows.iter().zip(res.iter_mut()) {
                    *e += a[c] * d;
                }
                v[c] = new;
                moved = moved.max(d.abs());
            }
        }
        if moved <= 1e-15 * bound {
            break;
        }
    }
    for (c, &i) in zero.iter().enumerate() {
        u[i] = v[c];
    }
    Some((u, zero.len()))
}

pub(crate) fn residuals_of(
    x: &DMatrix<f64>,
    loss: Loss,
    pen: &Penalty,
    r: &[f64],
    beta: &[f64],
    s: f64,
    tau: f64,
) -> KktReport {
    let n = r.len() as f64;
    let berhu_zero = pen.is_berhu() && tau <= 0.0;
    let lad = lad_multipliers(x, loss, pen, r, beta, s, tau, berhu_zero);
    let psi_r: Vec<f64> = match &lad {
        Some((u, _)) => u.clone(),
        None => r.iter().map(|ri| psi(loss, s, *ri).0).collect(),
    };
    let g: Vec<f64> = x
        .column_iter()
        .map(|col| -col.iter().zip(&psi_r).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let beta_res: Vec<f64> = (0..beta.len())
        .map(|j| {
            if berhu_zero {
                return 0.0;
            }
            let l1 = pen.l1_level(j);
            let norm = 1.0
                + match pen {
                    Penalty::Ridge { lambda } => *lambda,
                    _ => l1,
                };
            let (smooth, _) = smooth_penalty_derivative(pen, j, beta[j], tau);
            let h = g[j] + smooth;
            let res = if beta[j] != 0.0 {
                (h + l1 * beta[j].signum()).abs()
            } else {
                (h.abs() - l1).max(0.0)
            };
            res / norm
        })
        .collect();

    let alpha_res = psi_r.iter().sum::<f64>().abs();

    let scale_res = match loss {
        Loss::LeastSquares => 0.0,
        Loss::Huber { m } => {
            if let Some((_, zero_count)) = lad {
                let nonzero = n - zero_count as f64;
                (m * m * nonzero - n).max(0.0) / n
            } else if s > 0.0 {
                let mut q = 0.0;
                let mut large = 0usize;
                for ri in r {
                    if ri.abs() <= m * s {
                        q += ri * ri;
                    } else {
                        large += 1;
                    }
                }
                (n - q / (s * s) - m * m * large as f64).abs() / n
            } else {
                let nonzero = r.iter().filter(|ri| **ri != 0.0).count() as f64;
                (m * m * nonzero - n).max(0.0) / n
            }
        }
    };

    let tau_res = match pen {
        Penalty::AdaptiveBerHu { lambda, l, weights } if *lambda > 0.0 => {
            let inv_sum: f64 = weights.iter().map(|w| 1.0 / w).sum();
            let norm = 1.0 + lambda * inv_sum;
            if tau > 0.0 {
                let score: f64 = inv_sum
                    + beta
                        .iter()
                        .zip(weights.iter())
                        .map(|(b, w)| w * bh_conjugate_term(b / tau, *l))
                        .sum::<f64>();
                (lambda * score).abs() / norm
            } else {
                // g is the gradient at beta = 0 here
                (-zero_block_margin(&g, *lambda, *l, weights)).max(0.0) / norm
            }
        }
        _ => 0.0,
    };

    let max_residual = beta_res
        .iter()
        .copied()
        .chain([alpha_res, scale_res, tau_res])
        .fold(0.0, f64::max);
    KktReport {
        beta: beta_res,
        tau: tau_res,
        scale: scale_res,
        alpha: alpha_res,
        max_residual,
    }
}

/// Evaluates the stationarity conditions of `spec` at `fit`.
pub fn kkt_check(data: &Dataset, spec: &ModelSpec, fit: &FitResult) -> Result<KktReport> {
    spec.validate(data.p())?;
    if fit.beta.len() != data.p() {
        return Err(Error::Shape {
            expected: format!("{} coefficients", data.p()),
            found: format!("{}", fit.beta.len()),
        });
    }
    let s = match spec.loss {
        Loss::LeastSquares => 0.0,
        Loss::Huber { .. } => fit
            .s
            .ok_or_else(|| Error::InconsistentFit("Huber fit without a scale".into()))?,
    };
    let tau = if spec.penalty.is_berhu() {
        let tau = fit
            .tau
            .ok_or_else(|| Error::InconsistentFit("BerHu fit without tau".into()))?;
        if tau <= 0.0 && fit.beta.iter().any(|b| *b != 0.0) {
            return Err(Error::InconsistentFit(
                "tau = 0 with nonzero coefficients (infinite penalty)".into(),
            ));
        }
        tau
    } else {
        0.0
    };
    let r = data.residuals(fit.alpha, &fit.beta);
    Ok(residuals_of(
        data.x(),
        spec.loss,
        &spec.penalty,
        r.as_slice(),
        fit.beta.as_slice(),
        s,
        tau,
    ))
}
