//! Adaptive weights, hyperparameter grids, BIC selection and k-fold
//! cross-validation.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::data::{predict, Dataset, RngStream};
use crate::error::{Error, Result};
use crate::loss::huber_criterion;
use crate::model::{FitResult, Loss, ModelSpec, Penalty};
use crate::solver::{fit, fit_path, SolverConfig};

/// A coefficient counts as zero when `|b| < ZERO_THRESHOLD`.
pub const ZERO_THRESHOLD: f64 = 1e-5;
/// Lower clamp on `|beta_unpen|` when forming adaptive weights.
pub const WEIGHT_CLAMP: f64 = 1e-8;
/// Smallest nonzero grid point relative to the largest.
pub const GRID_FLOOR_RATIO: f64 = 1e-4;
/// The fixed `lambda2` grid for the elastic net.
pub const ENET_LAMBDA2_GRID: [f64; 6] = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0];

/// `w_j = 1 / max(|b_j|, clamp)^gamma`.
pub fn adaptive_weights(beta_unpen: &DVector<f64>, gamma: f64, clamp: f64) -> DVector<f64> {
    beta_unpen.map(|b| b.abs().max(clamp).powf(-gamma))
}

/// `log(RSS) + k log(n) / n`; `-inf` on a perfect fit.
pub fn bic_ls(data: &Dataset, fit: &FitResult, zero_threshold: f64) -> f64 {
    let r = data.residuals(fit.alpha, &fit.beta);
    let rss = r.norm_squared();
    if rss == 0.0 {
        return f64::NEG_INFINITY;
    }
    let n = data.n() as f64;
    rss.ln() + fit.support_size(zero_threshold) as f64 * n.ln() / n
}

/// `log(L_H(alpha, beta, s)) + k log(n) / (2n)`; `-inf` when the criterion is 0.
pub fn bic_huber(data: &Dataset, fit: &FitResult, m: f64, zero_threshold: f64) -> f64 {
    let r = data.residuals(fit.alpha, &fit.beta);
    let lh = huber_criterion(r.as_slice(), m, fit.s.unwrap_or(0.0));
    if lh == 0.0 {
        return f64::NEG_INFINITY;
    }
    let n = data.n() as f64;
    lh.ln() + fit.support_size(zero_threshold) as f64 * n.ln() / (2.0 * n)
}

/// BIC matching the loss of `spec`.
pub fn bic(data: &Dataset, spec: &ModelSpec, fit: &FitResult, zero_threshold: f64) -> f64 {
    match spec.loss {
        Loss::LeastSquares => bic_ls(data, fit, zero_threshold),
        Loss::Huber { m } => bic_huber(data, fit, m, zero_threshold),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    /// `{0}` followed by `count - 1` geometrically spaced points from `lo` to `hi`.
    ZeroThenGeometric,
    /// The fixed elastic-net `lambda2` set (ignores `count`, `lo`, `hi`).
    EnetLambda2,
}

/// Builds a tuning grid in increasing order.
pub fn make_grid(kind: GridKind, count: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    match kind {
        GridKind::EnetLambda2 => Ok(ENET_LAMBDA2_GRID.to_vec()),
        GridKind::ZeroThenGeometric => {
            if count < 2 {
                return Err(crate::error::param("count", "grid needs at least 2 points"));
            }
            if !(hi > 0.0 && hi.is_finite()) {
                return Err(crate::error::param("hi", "must be positive"));
            }
            if count == 2 {
                return Ok(vec![0.0, hi]);
            }
            if !(lo > 0.0 && lo < hi) {
                return Err(crate::error::param("lo", "must lie in (0, hi)"));
            }
            let k = count - 1;
            let ratio = (hi / lo).ln() / (k - 1) as f64;
            let mut out = Vec::with_capacity(count);
            out.push(0.0);
            for i in 0..k {
                out.push(if i == k - 1 {
                    hi
                } else {
                    lo * (ratio * i as f64).exp()
                });
            }
            Ok(out)
        }
    }
}

/// `{0} ∪ geometric(hi * 1e-4 .. hi)` with `count` points.
pub fn zero_log_grid(count: usize, hi: f64) -> Result<Vec<f64>> {
    make_grid(GridKind::ZeroThenGeometric, count, hi * GRID_FLOOR_RATIO, hi)
}

/// How a hyperparameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    BicLs,
    BicHuber,
    CrossValidation { folds: usize },
}

/// Grids and rule for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningPlan {
    pub method: String,
    pub grid: Vec<f64>,
    /// Secondary grid (`lambda2` for the elastic net).
    pub secondary_grid: Option<Vec<f64>>,
    pub rule: SelectionRule,
    pub zero_threshold: f64,
}

impl TuningPlan {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.secondary_grid.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(crate::error::param("grid", "must be nonempty"));
        }
        if let SelectionRule::CrossValidation { folds } = self.rule {
            if folds < 2 {
                return Err(crate::error::param("folds", "need at least 2"));
            }
        }
        Ok(())
    }
}

/// Outcome of BIC tuning.
#[derive(Debug, Clone)]
pub struct BicSelection {
    pub lambda: f64,
    pub fit: FitResult,
    /// `(lambda, bic)` for every grid point that fitted, in increasing `lambda`.
    pub scores: Vec<(f64, f64)>,
    pub failures: usize,
}

fn sorted_unique(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup();
    g
}

/// Picks the `lambda` minimizing the BIC of the template's loss along a
/// warm-started path. Ties go to the larger `lambda`.
pub fn select_by_bic(
    data: &Dataset,
    template: &ModelSpec,
    grid: &[f64],
    zero_threshold: f64,
    cfg: &SolverConfig,
) -> Result<BicSelection> {
    let grid = sorted_unique(grid);
    if grid.is_empty() {
        return Err(Error::Tuning("empty grid".into()));
    }
    let path = fit_path(data, template, &grid, cfg);
    let mut best: Option<(f64, f64, FitResult)> = None;
    let mut scores = Vec::with_capacity(grid.len());
    let mut failures = 0;
    for (lambda, res) in grid.iter().zip(path) {
        let Ok(f) = res else {
            failures += 1;
            continue;
        };
        let spec = ModelSpec::new(template.loss, template.penalty.with_lambda(*lambda));
        let score = bic(data, &spec, &f, zero_threshold);
        scores.push((*lambda, score));
        if best.as_ref().is_none_or(|(_, b, _)| score <= *b) {
            best = Some((*lambda, score, f));
        }
    }
    let (lambda, _, fit) = best.ok_or_else(|| Error::Tuning("every path fit failed".into()))?;
    Ok(BicSelection {
        lambda,
        fit,
        scores,
        failures,
    })
}

/// Outcome of cross-validated tuning.
#[derive(Debug, Clone)]
pub struct CvSelection {
    pub lambda: f64,
    pub lambda2: Option<f64>,
    pub fit: FitResult,
    pub score: f64,
    pub warnings: Vec<String>,
}

fn subset(data: &Dataset, rows: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let x = data.x().select_rows(rows);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| data.y()[i]));
    (x, y)
}

/// Returns the penalty with `lambda2` replaced (elastic net only).
fn with_lambda2(pen: &Penalty, lambda2: f64) -> Penalty {
    match pen {
        Penalty::AdaptiveElasticNet {
            lambda1, weights, ..
        } => Penalty::AdaptiveElasticNet {
            lambda1: *lambda1,
            lambda2,
            weights: weights.clone(),
        },
        other => other.clone(),
    }
}

/// k-fold cross-validation with squared prediction error. Folds are contiguous
/// blocks of a permutation drawn from `rng`. With a secondary grid the product
/// grid is searched. Ties go to the larger primary `lambda`, then the larger
/// secondary value.
pub fn select_by_cv(
    data: &Dataset,
    template: &ModelSpec,
    grid: &[f64],
    secondary: Option<&[f64]>,
    folds: usize,
    rng: &mut RngStream,
    cfg: &SolverConfig,
) -> Result<CvSelection> {
    let n = data.n();
    if folds < 2 {
        return Err(crate::error::param("folds", "need at least 2"));
    }
    if n < folds {
        return Err(Error::Precondition(format!("n = {n} < {folds} folds")));
    }
    let grid = sorted_unique(grid);
    let grid2 = secondary.map(sorted_unique).unwrap_or_else(|| vec![f64::NAN]);
    if grid.is_empty() || grid2.is_empty() {
        return Err(Error::Tuning("empty grid".into()));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);

    // errors[i2][i1] accumulates squared error; counts per cell
    let mut sse = vec![vec![0.0; grid.len()]; grid2.len()];
    let mut count = vec![vec![0usize; grid.len()]; grid2.len()];
    let mut warnings = Vec::new();
    for k in 0..folds {
        let lo = k * n / folds;
        let hi = (k + 1) * n / folds;
        let test: Vec<usize> = perm[lo..hi].to_vec();
        let mut train: Vec<usize> = perm[..lo].iter().chain(&perm[hi..]).copied().collect();
        train.sort_unstable();
        let (xtr, ytr) = subset(data, &train);
        let (xte, yte) = subset(data, &test);
        let train_data = match Dataset::from_raw(&xtr, ytr, None) {
            Ok(d) if d.0.n() >= 2 => d,
            _ => {
                warnings.push(format!("fold {k}: degenerate training design, skipped"));
                continue;
            }
        };
        let (train_data, means) = train_data;
        for (i2, l2) in grid2.iter().enumerate() {
            let pen = if l2.is_nan() {
                template.penalty.clone()
            } else {
                with_lambda2(&template.penalty, *l2)
            };
            let spec = ModelSpec::new(template.loss, pen);
            let path = fit_path(&train_data, &spec, &grid, cfg);
            for (i1, res) in path.into_iter().enumerate() {
                match res {
                    Ok(f) => {
                        let pred = predict(&f, &xte, &means)?;
                        sse[i2][i1] += (&yte - pred).norm_squared();
                        count[i2][i1] += test.len();
                    }
                    Err(e) => warnings.push(format!("fold {k}: fit failed: {e}")),
                }
            }
        }
    }

    let mut best: Option<(f64, usize, usize)> = None;
    for i2 in 0..grid2.len() {
        for i1 in 0..grid.len() {
            if count[i2][i1] == 0 {
                continue;
            }
            let score = sse[i2][i1] / count[i2][i1] as f64;
            let better = match best {
                None => true,
                Some((b, bi2, bi1)) => {
                    score < b || (score == b && (i1 > bi1 || (i1 == bi1 && i2 > bi2)))
                }
            };
            if better {
                best = Some((score, i2, i1));
            }
        }
    }
    let (score, i2, i1) = best.ok_or_else(|| Error::Tuning("no fold produced a fit".into()))?;
    let lambda = grid[i1];
    let lambda2 = (!grid2[i2].is_nan()).then_some(grid2[i2]);
    let mut pen = template.penalty.with_lambda(lambda);
    if let Some(l2) = lambda2 {
        pen = with_lambda2(&pen, l2);
    }
    let final_fit = fit(data, &ModelSpec::new(template.loss, pen), cfg)?;
    Ok(CvSelection {
        lambda,
        lambda2,
        fit: final_fit,
        score,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_with_support(alpha: f64, beta: Vec<f64>) -> FitResult {
        FitResult::point(alpha, DVector::from_vec(beta))
    }

    #[test]
    fn adaptive_weight_examples() {
        let w = adaptive_weights(&DVector::from_vec(vec![2.0, 0.5]), 1.0, WEIGHT_CLAMP);
        assert_eq!(w.as_slice(), &[0.5, 2.0]);
        let w = adaptive_weights(&DVector::from_vec(vec![1.0, -1.0, 1.0]), 2.7, WEIGHT_CLAMP);
        assert_eq!(w.as_slice(), &[1.0, 1.0, 1.0]);
        let w = adaptive_weights(&DVector::from_vec(vec![0.0]), 1.0, 1e-8);
        assert!((w[0] - 1e8).abs() < 1e-4);
    }

    #[test]
    fn adaptive_weights_scale() {
        let b = DVector::from_vec(vec![0.3, -2.0, 5.0]);
        let (c, g) = (3.0, 1.5);
        let w1 = adaptive_weights(&b, g, WEIGHT_CLAMP);
        let w2 = adaptive_weights(&(&b * c), g, WEIGHT_CLAMP);
        for j in 0..3 {
            assert!((w2[j] - c.powf(-g) * w1[j]).abs() < 1e-12 * w1[j]);
        }
    }

    /// Dataset with 100 rows, one column, residual sum of squares `rss` for the zero fit.
    fn data_with_rss(rss: f64) -> Dataset {
        let n = 100;
        let mut y = vec![0.0; n];
        let a = (rss / 2.0).sqrt();
        y[0] = a;
        y[1] = -a;
        let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Dataset::new(DMatrix::from_vec(n, 1, x), DVector::from_vec(y), None).unwrap()
    }

    #[test]
    fn bic_ls_examples() {
        let e = std::f64::consts::E;
        let data = data_with_rss(e);
        let zero = fit_with_support(0.0, vec![0.0]);
        assert!((bic_ls(&data, &zero, ZERO_THRESHOLD) - 1.0).abs() < 1e-12);
        // k counted from coefficients; beta tiny enough to leave RSS ~ e
        let with_k = fit_with_support(0.0, vec![1e-3]);
        let expect = data.residuals(0.0, &with_k.beta).norm_squared().ln() + 100f64.ln() / 100.0;
        assert!((bic_ls(&data, &with_k, ZERO_THRESHOLD) - expect).abs() < 1e-12);
        // direct arithmetic of the k = 2 example
        assert!((1.0 + 2.0 * 100f64.ln() / 100.0 - 1.0921034).abs() < 1e-7);
    }

    #[test]
    fn bic_huber_examples() {
        assert!((1.0 + 2.0 * 100f64.ln() / 200.0 - 1.0460517).abs() < 1e-7);
        let data = data_with_rss(8.0);
        let mut f = fit_with_support(0.0, vec![0.0]);
        f.s = Some(1.0);
        let r = data.residuals(0.0, &f.beta);
        let lh = huber_criterion(r.as_slice(), 1.345, 1.0);
        assert!((bic_huber(&data, &f, 1.345, ZERO_THRESHOLD) - lh.ln()).abs() < 1e-12);
        // k-term of the Huber BIC is half the least-squares one
        let mut g = fit_with_support(0.0, vec![0.5]);
        g.s = Some(1.0);
        let k_ls = bic_ls(&data, &g, ZERO_THRESHOLD)
            - data.residuals(0.0, &g.beta).norm_squared().ln();
        let lh = huber_criterion(data.residuals(0.0, &g.beta).as_slice(), 1.345, 1.0);
        let k_h = bic_huber(&data, &g, 1.345, ZERO_THRESHOLD) - lh.ln();
        assert!((k_ls - 2.0 * k_h).abs() < 1e-14);
    }

    #[test]
    fn bic_perfect_fit_sentinel() {
        let data = data_with_rss(0.0);
        let f = fit_with_support(0.0, vec![0.0]);
        assert_eq!(bic_ls(&data, &f, ZERO_THRESHOLD), f64::NEG_INFINITY);
    }

    #[test]
    fn bic_increases_with_support() {
        let data = data_with_rss(3.0);
        let n = 100f64;
        for base in [0.5, 3.0, 40.0] {
            let ls: Vec<f64> = (0..6).map(|k| base + k as f64 * n.ln() / n).collect();
            assert!(ls.windows(2).all(|w| w[1] > w[0]));
        }
        let _ = data;
    }

    #[test]
    fn grid_examples() {
        assert_eq!(zero_log_grid(2, 10.0).unwrap(), vec![0.0, 10.0]);
        let g = zero_log_grid(100, 1400.0).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[99], 1400.0);
        assert!((g[1] - 0.14).abs() < 1e-12);
        let ratios: Vec<f64> = g[1..].windows(2).map(|w| w[1] / w[0]).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-10);
        }
        assert_eq!(
            make_grid(GridKind::EnetLambda2, 0, 0.0, 0.0).unwrap(),
            vec![0.0, 0.01, 0.1, 1.0, 10.0, 100.0]
        );
        assert!(zero_log_grid(1, 10.0).is_err());
    }

    #[test]
    fn plan_validation() {
        let plan = TuningPlan {
            method: "ridge".into(),
            grid: vec![1.0],
            secondary_grid: None,
            rule: SelectionRule::CrossValidation { folds: 1 },
            zero_threshold: ZERO_THRESHOLD,
        };
        assert!(plan.validate().is_err());
    }
}
