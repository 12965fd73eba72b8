//! Solver results against independent brute-force searches.

use berhu::loss::huber_concomitant;
use berhu::penalty::adaptive_berhu_concomitant;
use berhu::{
    fit, fit_path, fit_unpenalized, fit_with_trace, kkt_check, Dataset, FitResult, Loss, ModelSpec,
    Penalty, RngStream, SolverConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

fn random_data(n: usize, p: usize, beta: &[f64], noise: f64, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, 0);
    let raw = DMatrix::from_fn(n, p, |_, _| gaussian(&mut rng));
    let y = DVector::from_fn(n, |i, _| {
        1.0 + (0..p).map(|j| raw[(i, j)] * beta[j]).sum::<f64>() + noise * gaussian(&mut rng)
    });
    Dataset::from_raw(&raw, y, None).unwrap().0
}

/// Least squares plus adaptive BerHu, evaluated from scratch: the intercept
/// is the response mean (centered design) and tau is profiled exactly.
fn ls_berhu_profile(data: &Dataset, lambda: f64, w: &DVector<f64>, l: f64, b: &[f64]) -> f64 {
    let beta = DVector::from_column_slice(b);
    let fitted = data.x() * &beta;
    let ybar = data.y().mean();
    let rss: f64 = (0..data.n())
        .map(|i| (data.y()[i] - ybar - fitted[i]).powi(2))
        .sum();
    rss + lambda * adaptive_berhu_concomitant(&beta, w, l).unwrap().value
}

/// Two-dimensional grid search, refined three times by a factor of ten
/// around the incumbent down to a step of `1e-3`.
fn grid_min_2d<F: Fn(&[f64]) -> f64>(f: F, centre: [f64; 2], half: f64) -> ([f64; 2], f64) {
    let mut best = centre;
    let mut best_val = f(&centre);
    let mut step = half / 50.0;
    let mut span = 50i32;
    while step >= 1e-3 * 0.999 {
        let c = best;
        for a in -span..=span {
            for b in -span..=span {
                let pt = [c[0] + a as f64 * step, c[1] + b as f64 * step];
                let v = f(&pt);
                if v < best_val {
                    best_val = v;
                    best = pt;
                }
            }
        }
        // include the axes exactly: the penalty has kinks there
        for a in -span..=span {
            for pt in [[c[0] + a as f64 * step, 0.0], [0.0, c[1] + a as f64 * step], [0.0, 0.0]] {
                let v = f(&pt);
                if v < best_val {
                    best_val = v;
                    best = pt;
                }
            }
        }
        step /= 10.0;
        span = 20;
    }
    (best, best_val)
}

#[test]
fn ls_berhu_matches_exhaustive_grid() {
    for seed in 0..6 {
        let data = random_data(8, 2, &[1.5, -0.5], 0.5, 100 + seed);
        let w = DVector::from_vec(vec![0.8, 1.7]);
        let spec = ModelSpec::new(
            Loss::LeastSquares,
            Penalty::AdaptiveBerHu {
                lambda: 1.0,
                l: 1.345,
                weights: w.clone(),
            },
        );
        let f = fit(&data, &spec, &SolverConfig::default()).unwrap();
        assert!(f.converged);
        let (_, oracle) = grid_min_2d(|b| ls_berhu_profile(&data, 1.0, &w, 1.345, b), [0.0, 0.0], 5.0);
        let gap = f.objective - oracle;
        assert!(
            gap <= 1e-4 * (1.0 + oracle.abs()),
            "seed {seed}: solver {} vs grid {oracle}",
            f.objective
        );
        assert!(-gap <= 1e-4 * (1.0 + oracle.abs()), "grid far above solver: {gap}");
    }
}

#[test]
fn huber_lasso_matches_exhaustive_grid() {
    for seed in 0..4 {
        let data = random_data(9, 2, &[-1.0, 2.0], 1.0, 300 + seed);
        let w = DVector::from_vec(vec![1.0, 0.5]);
        let lambda = 0.7;
        let spec = ModelSpec::new(
            Loss::Huber { m: 1.345 },
            Penalty::AdaptiveLasso {
                lambda,
                weights: w.clone(),
            },
        );
        let f = fit(&data, &spec, &SolverConfig::default()).unwrap();
        // intercept profiled by a fine 1-D search, s exactly
        let crit = |b: &[f64]| {
            let fitted = data.x() * DVector::from_column_slice(b);
            let loss_at = |a: f64| {
                let r: Vec<f64> = (0..data.n()).map(|i| data.y()[i] - a - fitted[i]).collect();
                huber_concomitant(&r, 1.345).unwrap().value
            };
            let (mut lo, mut hi) = (-10.0, 10.0);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if loss_at(m1) <= loss_at(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            loss_at(0.5 * (lo + hi)) + lambda * (w[0] * b[0].abs() + w[1] * b[1].abs())
        };
        let (_, oracle) = grid_min_2d(crit, [0.0, 0.0], 5.0);
        assert!(
            f.objective - oracle <= 1e-4 * (1.0 + oracle.abs()),
            "seed {seed}: solver {} vs grid {oracle}",
            f.objective
        );
    }
}

#[test]
fn huber_resists_a_gross_outlier() {
    let beta_star = [2.0, -1.0, 0.5];
    let mut rng = RngStream::new(42, 0);
    let raw = DMatrix::from_fn(60, 3, |_, _| gaussian(&mut rng));
    let mut y = DVector::from_fn(60, |i, _| {
        (0..3).map(|j| raw[(i, j)] * beta_star[j]).sum::<f64>() + 0.3 * gaussian(&mut rng)
    });
    y[7] += 80.0;
    let data = Dataset::from_raw(&raw, y, None).unwrap().0;
    let truth = DVector::from_column_slice(&beta_star);
    let ls = fit_unpenalized(&data, Loss::LeastSquares).unwrap();
    let hub = fit_unpenalized(&data, Loss::Huber { m: 1.345 }).unwrap();
    let err_ls = (&ls.beta - &truth).norm();
    let err_hub = (&hub.beta - &truth).norm();
    assert!(err_hub < err_ls, "huber {err_hub} vs ls {err_ls}");
    assert!(err_hub < 0.3, "{err_hub}");
}

fn berhu_spec(loss: Loss, lambda: f64, w: DVector<f64>) -> ModelSpec {
    ModelSpec::new(
        loss,
        Penalty::AdaptiveBerHu {
            lambda,
            l: 1.345,
            weights: w,
        },
    )
}

#[test]
fn perturbed_fit_fails_kkt() {
    let data = random_data(50, 5, &[2.0, 0.0, -1.0, 0.0, 0.5], 0.5, 9);
    let spec = berhu_spec(Loss::Huber { m: 1.345 }, 3.0, DVector::from_element(5, 1.0));
    let cfg = SolverConfig::default();
    let f = fit(&data, &spec, &cfg).unwrap();
    assert!(f.converged);
    assert!(kkt_check(&data, &spec, &f).unwrap().max_residual <= cfg.kkt_tol);
    let mut g: FitResult = f.clone();
    g.beta[0] += 0.1;
    assert!(kkt_check(&data, &spec, &g).unwrap().max_residual > cfg.kkt_tol);
}

#[test]
fn penalty_along_path_is_nonincreasing() {
    let data = random_data(40, 6, &[3.0, 3.0, 0.0, 0.0, -2.0, 0.5], 1.0, 5);
    let w = DVector::from_vec(vec![0.4, 0.5, 2.0, 3.0, 0.6, 1.5]);
    let spec = berhu_spec(Loss::LeastSquares, 0.0, w.clone());
    let grid: Vec<f64> = (0..30).map(|k| 0.05 * 1.3f64.powi(k)).collect();
    let fits = fit_path(&data, &spec, &grid, &SolverConfig::default());
    let pens: Vec<f64> = fits
        .iter()
        .map(|f| {
            let f = f.as_ref().unwrap();
            assert!(f.converged);
            adaptive_berhu_concomitant(&f.beta, &w, 1.345).unwrap().value
        })
        .collect();
    for k in 1..pens.len() {
        assert!(
            pens[k] <= pens[k - 1] * (1.0 + 1e-6) + 1e-9,
            "penalty rose at lambda {}: {} -> {}",
            grid[k],
            pens[k - 1],
            pens[k]
        );
    }
    assert!(pens[pens.len() - 1] < pens[0]);
}

#[test]
fn duplicated_columns_share_weighted_coefficients() {
    let mut rng = RngStream::new(77, 0);
    let n = 40;
    let base = DMatrix::from_fn(n, 3, |_, _| gaussian(&mut rng));
    let raw = DMatrix::from_fn(n, 4, |i, j| base[(i, if j == 3 { 0 } else { j })]);
    let y = DVector::from_fn(n, |i, _| 2.0 * base[(i, 0)] - base[(i, 1)] + 0.3 * gaussian(&mut rng));
    let data = Dataset::from_raw(&raw, y, None).unwrap().0;
    let spec = berhu_spec(Loss::LeastSquares, 2.0, DVector::from_element(4, 1.0));
    let f = fit(&data, &spec, &SolverConfig::default()).unwrap();
    assert!(f.converged);
    let tau = f.tau.unwrap();
    assert!(f.beta[0].abs() >= 1.345 * tau && f.beta[3].abs() >= 1.345 * tau);
    assert!((f.beta[0] - f.beta[3]).abs() <= 1e-6, "{} vs {}", f.beta[0], f.beta[3]);
}

fn instance() -> impl Strategy<Value = (Dataset, DVector<f64>, f64, bool)> {
    (any::<u64>(), 2usize..5, 0.05f64..5.0, any::<bool>()).prop_map(|(seed, p, lambda, huber)| {
        let mut rng = RngStream::new(seed, 1);
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w = DVector::from_fn(p, |_, _| rng.random_range(0.2..3.0));
        (random_data(25, p, &beta, 1.0, seed), w, lambda, huber)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn objective_never_increases_per_sweep((data, w, lambda, huber) in instance()) {
        let loss = if huber { Loss::Huber { m: 1.345 } } else { Loss::LeastSquares };
        let spec = berhu_spec(loss, lambda, w);
        let (f, trace) = fit_with_trace(&data, &spec, &SolverConfig::default()).unwrap();
        for k in 1..trace.len() {
            prop_assert!(trace[k] <= trace[k - 1] + 1e-12 * (1.0 + trace[k - 1].abs()));
        }
        prop_assert!(f.converged);
    }

    /// With fixed weights the Huber-BerHu criterion is positively homogeneous
    /// in `(y, alpha, beta, s, tau)`, so rescaling the response rescales the fit.
    #[test]
    fn huber_berhu_is_scale_equivariant((data, w, lambda, _h) in instance(), c in 0.1f64..20.0) {
        let spec = berhu_spec(Loss::Huber { m: 1.345 }, lambda, w);
        let cfg = SolverConfig::default();
        let f = fit(&data, &spec, &cfg).unwrap();
        let scaled = data.with_response(data.y() * c).unwrap();
        let g = fit(&scaled, &spec, &cfg).unwrap();
        prop_assert!((g.objective - c * f.objective).abs() <= 1e-7 * (1.0 + c * f.objective.abs()));
        for j in 0..f.beta.len() {
            prop_assert!((g.beta[j] - c * f.beta[j]).abs() <= 1e-4 * (1.0 + c * f.beta[j].abs()),
                "beta {} vs {}", g.beta[j], c * f.beta[j]);
        }
    }
}
