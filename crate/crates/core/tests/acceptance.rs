//! Acceptance suite. Runs every criterion in order and prints one
//! `PASS` / `FAIL` / `SKIP` line per criterion, then fails if any criterion failed.
//!
//! The prostate criterion reads its table from `BERHU_PROSTATE_DATA`; without
//! it the criterion is reported as skipped.

use std::io::Write;
use std::time::Instant;

use berhu::loss::{huber, huber_concomitant, huber_variational_gap};
use berhu::penalty::{
    adaptive_berhu_concomitant, adaptive_berhu_value, berhu_variational_gap, pen_closed_form,
    tau_stationarity,
};
use berhu::simulation::{fit_method, generate_design, generate_response, NoiseModel};
use berhu::{
    fit_with_trace, grouping_bound_all, kkt_check, load_table, resampling_study, run_experiment,
    BlockModelSpec, Dataset, ExperimentConfig, ExperimentReport, Loss, Method, ModelSpec, Penalty,
    ProtocolConfig, ResamplingConfig, RngStream, SolverConfig, TabularSource,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const PROSTATE_ENV: &str = "BERHU_PROSTATE_DATA";
const SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    id: usize,
    title: &'static str,
    status: Status,
    detail: String,
}

impl Outcome {
    fn new(id: usize, title: &'static str, ok: bool, detail: String) -> Self {
        Self {
            id,
            title,
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

/// Writes past the test harness capture so the lines always reach the log.
fn announce(o: &Outcome) {
    let tag = match o.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skip => "SKIP",
    };
    let line = format!("acceptance {:>2} {tag}  {}: {}\n", o.id, o.title, o.detail);
    let mut err = std::io::stderr().lock();
    let _ = err.write_all(line.as_bytes());
    let _ = err.flush();
}

fn gaussian(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// ------------------------------------------------------------------ 1

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let count = 100_000;
    for k in 0..count {
        let z = -50.0 + 100.0 * k as f64 / (count - 1) as f64;
        for c in [0.5, 1.0, 1.345, 3.0] {
            worst = worst.max(huber_variational_gap(z, c));
            worst = worst.max(berhu_variational_gap(z, c));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        1,
        "variational identities",
        worst <= 1e-10 && secs < 1.0,
        format!("worst gap {worst:.2e}, {secs:.2} s"),
    )
}

// ------------------------------------------------------------------ 2

/// Log-grid scan then golden-section refinement of a convex function of `t > 0`.
fn minimize_positive<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let at = |k: usize| (llo + (lhi - llo) * k as f64 / (points - 1) as f64).exp();
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for k in 0..points {
        let v = f(at(k));
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let mut a = at(best.saturating_sub(1));
    let mut b = at((best + 1).min(points - 1));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-14 * b {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    let v = f(t);
    if v <= best_val {
        (t, v)
    } else {
        (at(best), best_val)
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(SEED, 2);
    let (mut worst_val, mut worst_tau, mut worst_stat, mut worst_closed) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for inst in 0..1000 {
        let p = rng.random_range(1..=20);
        let unit = inst % 4 == 0;
        let beta = DVector::from_fn(p, |_, _| {
            if rng.random::<f64>() < 0.2 {
                0.0
            } else {
                let mag = 10f64.powf(rng.random_range(-3.0..2.0));
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
        });
        let mut beta = beta;
        if beta.iter().all(|b| *b == 0.0) {
            beta[0] = 1.0;
        }
        let w = DVector::from_fn(p, |_, _| {
            if unit {
                1.0
            } else {
                10f64.powf(rng.random_range(-1.0..1.0))
            }
        });
        let l = rng.random_range(0.5..3.0);
        let prof = adaptive_berhu_concomitant(&beta, &w, l).unwrap();
        let top = beta.amax() / l;
        let (t_oracle, v_oracle) =
            minimize_positive(|t| adaptive_berhu_value(&beta, &w, l, t), top * 1e-9, top * 4.0, 4000);
        worst_val = worst_val.max(rel(prof.value, v_oracle));
        worst_tau = worst_tau.max(rel(prof.tau_hat, t_oracle));
        let inv_sum: f64 = w.iter().map(|x| 1.0 / x).sum();
        let stat = tau_stationarity(&beta, &w, l, prof.tau_hat).abs() / inv_sum;
        worst_stat = worst_stat.max(stat);
        if unit {
            worst_closed = worst_closed.max(rel(prof.value, pen_closed_form(&beta, l).unwrap()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_val <= 1e-6 && worst_tau <= 1e-5 && worst_stat <= 1e-8 && worst_closed <= 1e-10 && secs < 10.0;
    Outcome::new(
        2,
        "concomitant tau oracle",
        ok,
        format!(
            "value {worst_val:.1e}, tau {worst_tau:.1e}, stationarity {worst_stat:.1e}, closed form {worst_closed:.1e}, {secs:.2} s"
        ),
    )
}

// ------------------------------------------------------------------ 3

/// Largest minimizer of `s -> n s + s sum H(r/s)` from the sign of its
/// derivative `n - sum_{|r| <= Ms} (r/s)^2 - M^2 #{|r| > Ms}`, which is
/// nondecreasing in `s`.
fn scale_oracle(r: &[f64], m: f64) -> f64 {
    let n = r.len() as f64;
    let d = |s: f64| {
        let mut v = n;
        for ri in r {
            if ri.abs() <= m * s {
                v -= (ri / s).powi(2);
            } else {
                v -= m * m;
            }
        }
        v
    };
    let rms = (r.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let amax = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut hi = 2.0 * rms.max(amax / m) + 1e-300;
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        0.0
    } else {
        hi
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(SEED, 3);
    let (mut worst_s, mut worst_grid) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let m = if rng.random::<bool>() { 1.0 } else { 1.345 };
        let r: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                if u < 0.1 {
                    0.0
                } else if u < 0.2 {
                    20.0 * gaussian(&mut rng)
                } else {
                    gaussian(&mut rng)
                }
            })
            .collect();
        let eval = huber_concomitant(&r, m).unwrap();
        let s_hat = eval.s_hat.unwrap_or(0.0);
        let oracle = scale_oracle(&r, m);
        if s_hat.max(oracle) > 0.0 {
            worst_s = worst_s.max(rel(s_hat, oracle));
        }
        // no grid point beats the returned value
        let crit = |s: f64| {
            if s == 0.0 {
                2.0 * m * r.iter().map(|x| x.abs()).sum::<f64>()
            } else {
                n as f64 * s + s * r.iter().map(|x| huber(x / s, m)).sum::<f64>()
            }
        };
        let amax = r.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-12);
        let grid_best = (0..2000)
            .map(|k| amax * 1e-6 * (1e7f64).powf(k as f64 / 1999.0))
            .map(crit)
            .fold(crit(0.0), f64::min);
        worst_grid = worst_grid.max((eval.value - grid_best) / grid_best.max(1e-300));
    }
    let worked = huber_concomitant(&[1.0, -1.0, 2.0], 1.0).unwrap();
    let worked_ok = worked.s_hat == Some(1.0) && worked.value == 8.0;
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        3,
        "concomitant scale oracle",
        worst_s <= 1e-8 && worst_grid <= 1e-12 && worked_ok,
        format!(
            "s relative error {worst_s:.1e}, value excess over grid {worst_grid:.1e}, worked example s = {:?} value = {}, {secs:.2} s",
            worked.s_hat, worked.value
        ),
    )
}

// ------------------------------------------------------------------ 4

/// Criterion profiled over the intercept and both concomitant scales: the
/// intercept in closed form (least squares) or by ternary search (Huber), the
/// scales by the exact one-dimensional scans checked in criteria 2 and 3.
fn profiled(data: &Dataset, spec: &ModelSpec, beta: &[f64]) -> f64 {
    let b = DVector::from_column_slice(beta);
    let fitted = data.x() * &b;
    let base: Vec<f64> = (0..data.n()).map(|i| data.y()[i] - fitted[i]).collect();
    let loss = match spec.loss {
        Loss::LeastSquares => {
            let mean = base.iter().sum::<f64>() / base.len() as f64;
            base.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        }
        Loss::Huber { m } => {
            let at = |a: f64| {
                let r: Vec<f64> = base.iter().map(|v| v - a).collect();
                huber_concomitant(&r, m).unwrap().value
            };
            let mut lo = base.iter().copied().fold(f64::INFINITY, f64::min);
            let mut hi = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for _ in 0..80 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if at(m1) <= at(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            at(0.5 * (lo + hi))
        }
    };
    let pen = match &spec.penalty {
        Penalty::AdaptiveLasso { lambda, weights } => {
            lambda * b.iter().zip(weights.iter()).map(|(x, w)| w * x.abs()).sum::<f64>()
        }
        Penalty::AdaptiveBerHu { lambda, l, weights } => {
            lambda * adaptive_berhu_concomitant(&b, weights, *l).unwrap().value
        }
        _ => unreachable!(),
    };
    loss + pen
}

/// Exhaustive search over a box, refined around the incumbent (axes included,
/// where the penalties have kinks), then polished by a shrinking pattern search.
fn exhaustive(f: &dyn Fn(&[f64]) -> f64, p: usize, half: f64) -> f64 {
    let mut best = vec![0.0; p];
    let mut best_val = f(&best);
    let consider =|pt: Vec<f64>, best: &mut Vec<f64>, best_val: &mut f64| {
        let v = f(&pt);
        if v < *best_val {
            *best_val = v;
            *best = pt;
        }
    };
    let mut step = half / 20.0;
    let mut span: i64 = 20;
    while step > 2e-4 {
        let c = best.clone();
        let offsets: Vec<f64> = (-span..=span).map(|k| k as f64 * step).collect();
        if p == 1 {
            for o in &offsets {
                consider(vec![c[0] + o], &mut best, &mut best_val);
            }
        } else {
            for o0 in &offsets {
                for o1 in &offsets {
                    consider(vec![c[0] + o0, c[1] + o1], &mut best, &mut best_val);
                }
                consider(vec![c[0] + o0, 0.0], &mut best, &mut best_val);
                consider(vec![0.0, c[1] + o0], &mut best, &mut best_val);
            }
        }
        step /= 5.0;
        span = 10;
    }
    let mut h = step;
    while h > 1e-10 {
        let mut moved = true;
        while moved {
            moved = false;
            for j in 0..p {
                for sgn in [-1.0, 1.0] {
                    let mut pt = best.clone();
                    pt[j] += sgn * h;
                    let v = f(&pt);
                    if v < best_val {
                        best_val = v;
                        best = pt;
                        moved = true;
                    }
                }
            }
        }
        h /= 2.0;
    }
    best_val
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(SEED, 4);
    let cfg = SolverConfig::default();
    let (mut worst_gap, mut worst_kkt) = (0.0f64, 0.0f64);
    let (mut unconverged, mut nonmonotone, mut fits) = (0, 0, 0);
    for huber_loss in [false, true] {
        for berhu_pen in [false, true] {
            for _ in 0..50 {
                let n = rng.random_range(5..=10);
                let p = rng.random_range(1..=2);
                let raw = DMatrix::from_fn(n, p, |_, _| gaussian(&mut rng));
                let coef: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
                let y = DVector::from_fn(n, |i, _| {
                    let outlier = if huber_loss && rng.random::<f64>() < 0.15 { 10.0 } else { 0.0 };
                    rng.random_range(-2.0..2.0)
                        + (0..p).map(|j| raw[(i, j)] * coef[j]).sum::<f64>()
                        + gaussian(&mut rng)
                        + outlier
                });
                let Ok((data, _)) = Dataset::from_raw(&raw, y, None) else {
                    continue;
                };
                let weights = DVector::from_fn(p, |_, _| rng.random_range(0.3..3.0));
                let lambda = 10f64.powf(rng.random_range(-1.5..0.7));
                let loss = if huber_loss { Loss::Huber { m: 1.345 } } else { Loss::LeastSquares };
                let penalty = if berhu_pen {
                    Penalty::AdaptiveBerHu { lambda, l: 1.345, weights }
                } else {
                    Penalty::AdaptiveLasso { lambda, weights }
                };
                let spec = ModelSpec::new(loss, penalty);
                let (fit, trace) = fit_with_trace(&data, &spec, &cfg).unwrap();
                fits += 1;
                if trace.windows(2).any(|w| w[1] > w[0] + 1e-12 * (1.0 + w[0].abs())) {
                    nonmonotone += 1;
                }
                if fit.converged {
                    worst_kkt = worst_kkt.max(kkt_check(&data, &spec, &fit).unwrap().max_residual);
                } else {
                    unconverged += 1;
                }
                let yspan = data.y().amax() + 1.0;
                let xscale = data.x().column_iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
                let half = 4.0 * yspan * (n as f64).sqrt() / xscale.max(1e-3) + 1.0;
                let oracle = exhaustive(&|b: &[f64]| profiled(&data, &spec, b), p, half);
                worst_gap = worst_gap.max((fit.objective - oracle).abs() / (1.0 + oracle.abs()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        4,
        "solver global optimality",
        worst_gap <= 1e-4 && worst_kkt <= 1e-6 && nonmonotone == 0 && secs < 120.0,
        format!(
            "{fits} fits, worst objective gap {worst_gap:.1e}, worst KKT {worst_kkt:.1e}, {unconverged} unconverged, {nonmonotone} non-monotone, {secs:.1} s"
        ),
    )
}

// ------------------------------------------------------------------ 5

struct Grouping {
    ok: bool,
    detail: String,
    json: String,
}

fn criterion_5_run(seed: u64) -> Grouping {
    let start = Instant::now();
    let model = BlockModelSpec::model(1).unwrap();
    let protocol = ProtocolConfig::default();
    let mut pairs = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut records = Vec::new();
    let mut design_rng = RngStream::new(seed, 5_000);
    let (train, _) = generate_design(&model, 100, 1, &mut design_rng).unwrap();
    for rep in 0..20u64 {
        let mut noise = RngStream::new(seed, 5_001 + rep);
        let y = generate_response(&train, &model, &mut noise).unwrap();
        let data = Dataset::new(train.clone(), y, None).unwrap();
        let mut tuning = RngStream::new(seed, 6_000 + rep);
        let mf = fit_method(&data, Method::AdBerhu, &protocol, &mut tuning).unwrap();
        let applies = mf.fit.tau.is_some_and(|t| t > 0.0) && mf.lambda.is_some_and(|l| l > 0.0);
        if !applies {
            records.push(serde_json::json!({ "rep": rep, "skipped": true }));
            continue;
        }
        let summary = grouping_bound_all(&data, &mf.spec, &mf.fit).unwrap();
        pairs += summary.pairs_checked;
        violations += summary.violations;
        worst = worst.max(summary.worst_excess);
        records.push(serde_json::json!({
            "rep": rep,
            "lambda": mf.lambda,
            "beta": mf.fit.beta.as_slice(),
            "pairs": summary.pairs_checked,
            "violations": summary.violations,
            "worst_excess": summary.worst_excess,
        }));
    }

    // duplicated column, equal weights, both coefficients in the quadratic zone
    let mut rng = RngStream::new(seed, 5_500);
    let n = 60;
    let base = DMatrix::from_fn(n, 3, |_, _| gaussian(&mut rng));
    let raw = DMatrix::from_fn(n, 4, |i, j| base[(i, if j == 3 { 0 } else { j })]);
    let y = DVector::from_fn(n, |i, _| 4.0 * base[(i, 0)] - base[(i, 1)] + 0.5 * gaussian(&mut rng));
    let data = Dataset::from_raw(&raw, y, None).unwrap().0;
    let w = DVector::from_element(4, 1.0);
    let spec = ModelSpec::new(
        Loss::LeastSquares,
        Penalty::AdaptiveBerHu { lambda: 3.0, l: 1.345, weights: w.clone() },
    );
    let f = berhu::fit(&data, &spec, &SolverConfig::default()).unwrap();
    let tau = f.tau.unwrap_or(0.0);
    let in_quad = f.beta[0].abs() >= 1.345 * tau && f.beta[3].abs() >= 1.345 * tau && tau > 0.0;
    let dup_gap = (w[0] * f.beta[0] - w[3] * f.beta[3]).abs();

    let secs = start.elapsed().as_secs_f64();
    let ok = violations == 0 && pairs > 0 && in_quad && dup_gap <= 1e-6 && secs < 300.0;
    let json = serde_json::to_string(&serde_json::json!({
        "fits": records,
        "duplicate": { "beta": f.beta.as_slice(), "tau": f.tau, "gap": dup_gap },
    }))
    .unwrap();
    Grouping {
        ok,
        detail: format!(
            "{pairs} pairs, {violations} violations, worst excess {worst:.1e}; duplicated columns gap {dup_gap:.1e} (quadratic zone: {in_quad}), {secs:.1} s"
        ),
        json,
    }
}

// ------------------------------------------------------------------ 6, 7

struct Studies {
    model1: ExperimentReport,
    model2_n400: ExperimentReport,
    model2_n100: ExperimentReport,
}

fn run_studies(seed: u64) -> Studies {
    let m1 = ExperimentConfig::new(
        BlockModelSpec::model(1).unwrap(),
        100,
        vec![Method::AdLasso, Method::AdBerhu],
        20,
        seed,
    );
    let m2 = |n| {
        ExperimentConfig::new(
            BlockModelSpec::model(2).unwrap(),
            n,
            vec![Method::HuberAdLasso, Method::HuberAdBerhu],
            20,
            seed,
        )
    };
    let m2_small = ExperimentConfig {
        methods: vec![Method::HuberAdBerhu],
        ..m2(100)
    };
    Studies {
        model1: run_experiment(&m1).unwrap(),
        model2_n400: run_experiment(&m2(400)).unwrap(),
        model2_n100: run_experiment(&m2_small).unwrap(),
    }
}

fn criterion_6(s: &Studies) -> Outcome {
    let sel = |r: &ExperimentReport, m| r.method(m).unwrap().selection.unwrap();
    let berhu1 = sel(&s.model1, Method::AdBerhu);
    let lasso1 = sel(&s.model1, Method::AdLasso);
    let berhu2 = sel(&s.model2_n400, Method::HuberAdBerhu);
    let lasso2 = sel(&s.model2_n400, Method::HuberAdLasso);
    let ok = berhu1.cnz >= 12.0
        && lasso1.cnz <= 8.0
        && lasso1.cz >= 20.0
        && (12.0..=15.0).contains(&berhu2.cnz)
        && berhu2.c >= lasso2.c
        && s.model1.runtime_secs <= 1800.0
        && s.model2_n400.runtime_secs <= 1800.0;
    Outcome::new(
        6,
        "simulation reproduction",
        ok,
        format!(
            "model 1: CNZ ad-berhu {:.2}, CNZ ad-lasso {:.2}, CZ ad-lasso {:.2} ({:.1} s); model 2 n=400: CNZ huber-ad-berhu {:.2}, C {} vs huber-ad-lasso C {} ({:.1} s)",
            berhu1.cnz,
            lasso1.cnz,
            lasso1.cz,
            s.model1.runtime_secs,
            berhu2.cnz,
            berhu2.c,
            lasso2.c,
            s.model2_n400.runtime_secs
        ),
    )
}

fn criterion_7(s: &Studies) -> Outcome {
    let c = |r: &ExperimentReport| r.method(Method::HuberAdBerhu).unwrap().selection.unwrap().c;
    let (small, large) = (c(&s.model2_n100), c(&s.model2_n400));
    Outcome::new(
        7,
        "oracle-property trend",
        large >= small,
        format!("exact support recoveries: n=100 {small}, n=400 {large}"),
    )
}

// ------------------------------------------------------------------ 8

fn criterion_8() -> Outcome {
    let sample = |noise: NoiseModel, seed: u64| {
        let mut rng = RngStream::new(seed, 8);
        let v: Vec<f64> = (0..1_000_000).map(|_| noise.draw(&mut rng)).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
    };
    let m2 = BlockModelSpec::model(2).unwrap();
    let sd = m2.sigma * sample(m2.noise, SEED).sqrt();
    let var3 = sample(BlockModelSpec::model(3).unwrap().noise, SEED + 1);
    Outcome::new(
        8,
        "noise models",
        (14.8..=15.2).contains(&sd) && (0.99..=1.01).contains(&var3),
        format!("model 2 sd {sd:.4}, model 3 standardized variance {var3:.4}"),
    )
}

// ------------------------------------------------------------------ 9

fn criterion_9() -> Outcome {
    let title = "prostate study";
    let path = match std::env::var_os(PROSTATE_ENV) {
        Some(p) if std::path::Path::new(&p).is_file() => p,
        Some(p) => {
            return Outcome {
                id: 9,
                title,
                status: Status::Skip,
                detail: format!("{PROSTATE_ENV}={} is not a file", p.to_string_lossy()),
            }
        }
        None => {
            return Outcome {
                id: 9,
                title,
                status: Status::Skip,
                detail: format!("set {PROSTATE_ENV} to the prostate table to run"),
            }
        }
    };
    let table = match load_table(&TabularSource::prostate(&path)) {
        Ok(t) => t,
        Err(e) => return Outcome::new(9, title, false, format!("cannot load: {e}")),
    };
    let methods = vec![Method::Ols, Method::AdBerhu, Method::HuberAdLasso, Method::AdEn];
    let cfg = ResamplingConfig::new(methods, SEED);
    let report = match resampling_study(&table.data, &cfg) {
        Ok(r) => r,
        Err(e) => return Outcome::new(9, title, false, format!("study failed: {e}")),
    };
    let mse = report.method(Method::Ols).and_then(|m| m.mse).map(|m| m.mean);
    let count = |m| report.method(m).and_then(|s| s.selected_count).map(|c| c.mean);
    let (Some(mse), Some(b), Some(hl), Some(en)) = (
        mse,
        count(Method::AdBerhu),
        count(Method::HuberAdLasso),
        count(Method::AdEn),
    ) else {
        return Outcome::new(9, title, false, "a method produced no successful split".into());
    };
    let between = b > hl.min(en) && b < hl.max(en);
    Outcome::new(
        9,
        title,
        (mse - 0.6054).abs() <= 0.15 && between,
        format!(
            "{} rows, OLS mean MSE {mse:.4}; mean selected: huber-ad-lasso {hl:.2}, ad-berhu {b:.2}, ad-en {en:.2}",
            table.rows
        ),
    )
}

// ------------------------------------------------------------------ 10

fn studies_json(s: &Studies) -> [String; 3] {
    [
        serde_json::to_string(&s.model1).unwrap(),
        serde_json::to_string(&s.model2_n400).unwrap(),
        serde_json::to_string(&s.model2_n100).unwrap(),
    ]
}

#[test]
fn acceptance_criteria() {
    let mut outcomes = Vec::new();
    let mut record = |o: Outcome| {
        announce(&o);
        outcomes.push((o.id, o.status));
    };
    record(criterion_1());
    record(criterion_2());
    record(criterion_3());
    record(criterion_4());

    let grouping = criterion_5_run(SEED);
    record(Outcome::new(5, "grouping bound certification", grouping.ok, grouping.detail.clone()));

    let studies = run_studies(SEED);
    record(criterion_6(&studies));
    record(criterion_7(&studies));
    record(criterion_8());
    record(criterion_9());

    let again_grouping = criterion_5_run(SEED);
    let again = run_studies(SEED);
    let first = studies_json(&studies);
    let second = studies_json(&again);
    let same = [
        grouping.json == again_grouping.json,
        first[0] == second[0],
        first[1] == second[1],
        first[2] == second[2],
    ];
    record(Outcome::new(
        10,
        "determinism",
        same.iter().all(|s| *s),
        format!(
            "identical reports: grouping {}, model 1 {}, model 2 n=400 {}, model 2 n=100 {}",
            same[0], same[1], same[2], same[3]
        ),
    ));

    let failed: Vec<usize> = outcomes
        .iter()
        .filter(|(_, s)| *s == Status::Fail)
        .map(|(id, _)| *id)
        .collect();
    let skipped = outcomes.iter().filter(|(_, s)| *s == Status::Skip).count();
    let summary = format!(
        "acceptance summary: {} passed, {} failed, {} skipped\n",
        outcomes.len() - failed.len() - skipped,
        failed.len(),
        skipped
    );
    let _ = std::io::stderr().lock().write_all(summary.as_bytes());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
