//! Grouping-effect bound, selection metrics and relative prediction error.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{FitResult, Loss, ModelSpec, Penalty};

/// Slack added to the right-hand side of the grouping bound.
pub const GROUPING_SLACK: f64 = 1e-8;

/// Grouping-effect bound for one pair of coefficients of an LS + BerHu fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupingBoundReport {
    pub i: usize,
    pub j: usize,
    /// `|w_i b_i - w_j b_j|`
    pub lhs: f64,
    pub c_ij: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

/// Checks `|w_i b_i - w_j b_j| <= (2 L tau / lambda) ||y|| sqrt(|x_i|^2 + |x_j|^2 - 2 C x_i'x_j)`.
pub fn grouping_bound(
    data: &Dataset,
    spec: &ModelSpec,
    fit: &FitResult,
    i: usize,
    j: usize,
) -> Result<GroupingBoundReport> {
    let (lambda, l, w) = match (&spec.loss, &spec.penalty) {
        (Loss::LeastSquares, Penalty::AdaptiveBerHu { lambda, l, weights }) => {
            (*lambda, *l, weights)
        }
        _ => {
            return Err(Error::Precondition(
                "grouping bound needs least squares with the BerHu penalty".into(),
            ))
        }
    };
    let p = data.p();
    if i >= p || j >= p || fit.beta.len() != p {
        return Err(Error::Precondition(format!("pair ({i}, {j}) out of range for p = {p}")));
    }
    if lambda <= 0.0 {
        return Err(Error::Precondition("lambda must be positive".into()));
    }
    let tau = fit.tau.unwrap_or(0.0);
    if tau <= 0.0 {
        return Err(Error::Precondition("tau must be positive".into()));
    }
    let (bi, bj) = (fit.beta[i], fit.beta[j]);
    if bi == 0.0 || bj == 0.0 {
        return Err(Error::Precondition(format!("zero coefficient in pair ({i}, {j})")));
    }
    let lt = l * tau;
    let c_ij = 1.0f64
        .min(bj.abs() / lt)
        .min(bi.abs() / lt)
        .min((bi * bj).abs() / (lt * lt));
    let x = data.x();
    let (xi, xj) = (x.column(i), x.column(j));
    let inner = xi.norm_squared() + xj.norm_squared() - 2.0 * c_ij * xi.dot(&xj);
    let rhs = 2.0 * lt / lambda * data.y().norm() * inner.max(0.0).sqrt();
    let lhs = (w[i] * bi - w[j] * bj).abs();
    Ok(GroupingBoundReport {
        i,
        j,
        lhs,
        c_ij,
        rhs,
        satisfied: lhs <= rhs + GROUPING_SLACK,
    })
}

/// Bound checks over every pair of nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupingSummary {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` over the checked pairs.
    pub worst_excess: f64,
    pub reports: Vec<GroupingBoundReport>,
}

pub fn grouping_bound_all(
    data: &Dataset,
    spec: &ModelSpec,
    fit: &FitResult,
) -> Result<GroupingSummary> {
    let nz: Vec<usize> = (0..fit.beta.len()).filter(|&k| fit.beta[k] != 0.0).collect();
    let mut reports = Vec::new();
    for (a, &i) in nz.iter().enumerate() {
        for &j in &nz[a + 1..] {
            reports.push(grouping_bound(data, spec, fit, i, j)?);
        }
    }
    let violations = reports.iter().filter(|r| !r.satisfied).count();
    let worst_excess = reports
        .iter()
        .map(|r| r.lhs - r.rhs)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GroupingSummary {
        pairs_checked: reports.len(),
        violations,
        worst_excess,
        reports,
    })
}

/// Selection quality over a set of replications.
///
/// `c`, `o`, `u` count correct, overfitted and underfitted models; `z`, `cz`,
/// `cnz` average the number of zeros, correct zeros and correct nonzeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionMetrics {
    pub c: usize,
    pub o: usize,
    pub u: usize,
    pub z: f64,
    pub cz: f64,
    pub cnz: f64,
    pub tz: usize,
    pub tnz: usize,
}

/// A coefficient counts as zero iff `|b_j| < zero_threshold`.
pub fn selection_metrics(
    fits: &[DVector<f64>],
    true_support: &[bool],
    zero_threshold: f64,
) -> SelectionMetrics {
    let tnz = true_support.iter().filter(|&&s| s).count();
    let tz = true_support.len() - tnz;
    let (mut c, mut o, mut u) = (0, 0, 0);
    let (mut z, mut cz, mut cnz) = (0usize, 0usize, 0usize);
    for b in fits {
        let mut zeros = 0;
        let mut correct_zero = 0;
        let mut correct_nonzero = 0;
        for (k, &truth) in true_support.iter().enumerate() {
            let is_zero = b[k].abs() < zero_threshold;
            zeros += is_zero as usize;
            if truth && !is_zero {
                correct_nonzero += 1;
            }
            if !truth && is_zero {
                correct_zero += 1;
            }
        }
        if correct_nonzero < tnz {
            u += 1;
        } else if correct_zero < tz {
            o += 1;
        } else {
            c += 1;
        }
        z += zeros;
        cz += correct_zero;
        cnz += correct_nonzero;
    }
    let reps = fits.len().max(1) as f64;
    SelectionMetrics {
        c,
        o,
        u,
        z: z as f64 / reps,
        cz: cz as f64 / reps,
        cnz: cnz as f64 / reps,
        tz,
        tnz,
    }
}

/// Relative prediction error: mean over the test rows of
/// `((a - a*) + x'(b - b*))^2`, divided by `sigma^2`.
pub fn rpe(
    alpha: f64,
    beta: &DVector<f64>,
    true_alpha: f64,
    true_beta: &DVector<f64>,
    test_design: &DMatrix<f64>,
    sigma: f64,
) -> f64 {
    let m = test_design.nrows();
    if m == 0 {
        return 0.0;
    }
    let db = beta - true_beta;
    let da = alpha - true_alpha;
    let err = test_design * db;
    err.iter().map(|e| (da + e).powi(2)).sum::<f64>() / m as f64 / (sigma * sigma)
}
