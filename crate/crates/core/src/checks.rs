//! Self-check suites: closed forms and the solver against direct numerical
//! oracles (grid scans refined by golden-section search or bisection).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::{Dataset, RngStream};
use crate::diagnostics::grouping_bound_all;
use crate::error::{param, Error, Result};
use crate::loss::{huber_concomitant, huber_criterion, huber_variational_gap};
use crate::model::{Loss, ModelSpec, Penalty, DEFAULT_BERHU_L, DEFAULT_HUBER_M};
use crate::penalty::{
    adaptive_berhu_concomitant, adaptive_berhu_value, berhu_variational_gap, enet_value,
    lasso_value, pen_closed_form, ridge_value, tau_stationarity,
};
use crate::simulation::{generate_design, generate_response, BlockModelSpec};
use crate::solver::{fit_unpenalized, fit_with_trace, SolverConfig};
use crate::tuning::{adaptive_weights, select_by_bic, zero_log_grid, WEIGHT_CLAMP, ZERO_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Variational,
    Tau,
    Scale,
    BruteForce,
    Grouping,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Variational,
        Suite::Tau,
        Suite::Scale,
        Suite::BruteForce,
        Suite::Grouping,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Variational => "variational",
            Suite::Tau => "tau",
            Suite::Scale => "scale",
            Suite::BruteForce => "brute-force",
            Suite::Grouping => "grouping",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if tok == "all" {
                out.extend(Suite::ALL);
            } else {
                out.push(tok.parse()?);
            }
        }
        if out.is_empty() {
            return Err(param("suites", "no suite given"));
        }
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| param("suites", format!("unknown suite '{s}'")))
    }
}

impl Serialize for Suite {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Deliberate defects for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fault {
    /// Scale the concomitant `tau` by `1 + 1e-3` before it is checked.
    PerturbTau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub fault: Option<Fault>,
    /// Random instances for the `tau` and `scale` suites.
    pub instances: usize,
    /// Random instances per loss/penalty pair in the brute-force suite.
    pub brute_force_instances: usize,
    /// Model-1 fits in the grouping suite.
    pub grouping_fits: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            seed: 20_240_601,
            fault: None,
            instances: 1000,
            brute_force_instances: 50,
            grouping_fits: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Largest normalized discrepancy seen (suite-specific units).
    pub worst: f64,
    /// First failing case, if any.
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub results: Vec<SuiteResult>,
}

impl CheckReport {
    pub fn first_failure(&self) -> Option<&SuiteResult> {
        self.results.iter().find(|r| !r.passed)
    }
}

struct Tally {
    suite: Suite,
    cases: usize,
    failures: usize,
    worst: f64,
    first: Option<String>,
}

impl Tally {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            cases: 0,
            failures: 0,
            worst: 0.0,
            first: None,
        }
    }

    /// Records one case with discrepancy `err` against tolerance `tol`.
    fn case(&mut self, err: f64, tol: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        let ratio = if err.is_nan() { f64::INFINITY } else { err / tol };
        self.worst = self.worst.max(ratio);
        if !(err <= tol) {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(what());
            }
        }
    }

    fn fail(&mut self, what: String) {
        self.cases += 1;
        self.failures += 1;
        self.worst = f64::INFINITY;
        if self.first.is_none() {
            self.first = Some(what);
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            suite: self.suite,
            passed: self.failures == 0,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            first_failure: self.first,
        }
    }
}

/// Minimizes a convex `f` on `[lo, hi]`: scan `points` grid nodes, then
/// golden-section search between the neighbours of the best node.
pub fn grid_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let h = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f(lo));
    for k in 1..points {
        let x = lo + k as f64 * h;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    golden(&mut f, (best.0 - h).max(lo), (best.0 + h).min(hi), best)
}

fn golden<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, seed: (f64, f64)) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a) <= 1e-10 * (1.0 + a.abs() + b.abs()) {
            break;
        }
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
    let mut best = seed;
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Same as [`grid_golden`] over a log-spaced grid on `[lo, hi]`, `lo > 0`.
pub fn log_grid_golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let ratio = (hi / lo).powf(1.0 / (points - 1) as f64);
    let mut best = (lo, f(lo));
    let mut best_k = 0;
    for k in 1..points {
        let x = lo * ratio.powi(k as i32);
        let v = f(x);
        if v < best.1 {
            best = (x, v);
            best_k = k;
        }
    }
    let a = lo * ratio.powi(best_k as i32 - 1);
    let b = (lo * ratio.powi(best_k as i32 + 1)).min(hi);
    golden(&mut f, a.max(lo * 0.5), b, best)
}

fn variational_suite() -> SuiteResult {
    let mut t = Tally::new(Suite::Variational);
    let count = 100_000;
    let mut worst = (0.0f64, 0.0, 0.0);
    let mut cases = 0;
    for &c in &[0.5, 1.0, DEFAULT_HUBER_M, 3.0] {
        for k in 0..count {
            let z = -50.0 + 100.0 * k as f64 / (count - 1) as f64;
            let g = huber_variational_gap(z, c).max(berhu_variational_gap(z, c));
            cases += 1;
            if g > worst.0 {
                worst = (g, z, c);
            }
        }
    }
    t.case(worst.0, 1e-10, || {
        format!("gap {:.3e} at z = {}, threshold {}", worst.0, worst.1, worst.2)
    });
    t.cases = cases;
    t.finish()
}

fn tau_suite(opts: &CheckOptions) -> SuiteResult {
    let mut t = Tally::new(Suite::Tau);
    let mut rng = RngStream::new(opts.seed, 1);
    for inst in 0..opts.instances {
        let p = 1 + (rng.random::<u32>() % 20) as usize;
        let unit = inst % 4 == 0;
        let l = [0.5, 1.0, DEFAULT_BERHU_L, 3.0][(rng.random::<u32>() % 4) as usize];
        let beta = DVector::from_fn(p, |_, _| {
            if rng.open_unit() < 0.15 {
                0.0
            } else {
                let z: f64 = rng.sample(StandardNormal);
                z * 10f64.powf(2.0 * rng.open_unit() - 1.0)
            }
        });
        if beta.iter().all(|b| *b == 0.0) {
            continue;
        }
        let w = DVector::from_fn(p, |_, _| {
            if unit {
                1.0
            } else {
                10f64.powf(2.0 * rng.open_unit() - 1.0)
            }
        });
        let prof = match adaptive_berhu_concomitant(&beta, &w, l) {
            Ok(p) => p,
            Err(e) => {
                t.fail(format!("instance {inst}: {e}"));
                continue;
            }
        };
        let tau = match opts.fault {
            Some(Fault::PerturbTau) => prof.tau_hat * (1.0 + 1e-3),
            None => prof.tau_hat,
        };
        let value = adaptive_berhu_value(&beta, &w, l, tau);
        let bmax = beta.amax() / l;
        let (tg, vg) = log_grid_golden(|s| adaptive_berhu_value(&beta, &w, l, s), bmax * 1e-7, bmax * 2.0, 10_000);
        let rel_v = (value - vg).abs() / vg.abs().max(1e-300);
        t.case(rel_v, 1e-6, || format!("instance {inst}: value {value} vs grid {vg}"));
        let rel_t = (tau - tg).abs() / tg;
        t.case(rel_t, 1e-5, || format!("instance {inst}: tau {tau} vs grid {tg}"));
        let inv_sum: f64 = w.iter().map(|v| 1.0 / v).sum();
        let score = tau_stationarity(&beta, &w, l, tau) / inv_sum;
        t.case(score.abs(), 1e-8, || format!("instance {inst}: stationarity residual {score:.3e}"));
        if unit {
            match pen_closed_form(&beta, l) {
                Ok(cf) => {
                    let rel = (cf - value).abs() / cf.abs().max(1e-300);
                    t.case(rel, 1e-10, || format!("instance {inst}: closed form {cf} vs scan {value}"));
                }
                Err(e) => t.fail(format!("instance {inst}: {e}")),
            }
        }
    }
    t.finish()
}

/// Largest minimizer of `s -> L_H(r, s)` by bisection on the sign of the
/// derivative `n - sum_{small} r^2/s^2 - M^2 #large`.
pub fn scale_by_bisection(r: &[f64], m: f64) -> f64 {
    let n = r.len() as f64;
    let deriv = |s: f64| {
        let mut d = n;
        for &v in r {
            let z = v.abs() / s;
            if z <= m {
                d -= z * z;
            } else {
                d -= m * m;
            }
        }
        d
    };
    let hi0 = r.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0;
    let (mut lo, mut hi) = (0.0, hi0);
    while deriv(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if lo == 0.0 && deriv(f64::MIN_POSITIVE) > 0.0 {
        return 0.0;
    }
    hi
}

fn scale_suite(opts: &CheckOptions) -> SuiteResult {
    let mut t = Tally::new(Suite::Scale);
    match huber_concomitant(&[1.0, -1.0, 2.0], 1.0) {
        Ok(ev) => {
            let ok = ev.s_hat == Some(1.0) && ev.value == 8.0;
            t.case(if ok { 0.0 } else { 1.0 }, 0.5, || {
                format!("worked example gave s = {:?}, value {}", ev.s_hat, ev.value)
            });
        }
        Err(e) => t.fail(format!("worked example: {e}")),
    }
    let mut rng = RngStream::new(opts.seed, 2);
    for inst in 0..opts.instances {
        let n = 1 + (rng.random::<u32>() % 50) as usize;
        let m = if inst % 2 == 0 { 1.0 } else { DEFAULT_HUBER_M };
        let r: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                if rng.open_unit() < 0.1 {
                    20.0 * z
                } else {
                    z
                }
            })
            .collect();
        let ev = match huber_concomitant(&r, m) {
            Ok(ev) => ev,
            Err(e) => {
                t.fail(format!("instance {inst}: {e}"));
                continue;
            }
        };
        let s = ev.s_hat.unwrap_or(0.0);
        let so = scale_by_bisection(&r, m);
        let vo = huber_criterion(&r, m, so);
        let rel_v = (ev.value - vo).abs() / vo.abs().max(1e-300);
        t.case(rel_v, 1e-8, || format!("instance {inst}: value {} vs oracle {vo}", ev.value));
        let rel_s = (s - so).abs() / so.max(1e-300);
        t.case(rel_s, 1e-8, || format!("instance {inst}: s {s} vs oracle {so}"));
        // the oracle itself against a plain grid of the criterion
        let hi = r.iter().fold(0.0f64, |a, v| a.max(v.abs())) * 1.5 + 1e-12;
        let (_, vg) = grid_golden(|x| huber_criterion(&r, m, x), 0.0, hi, 2000);
        let rel_g = (ev.value - vg).max(0.0) / vg.abs().max(1e-300);
        t.case(rel_g, 1e-8, || format!("instance {inst}: value {} above grid {vg}", ev.value));
    }
    t.finish()
}

/// Nested-search oracle for `min_{alpha, beta} Q`, with `s` and `tau` profiled
/// out exactly. `p` must be 1 or 2; `half_width` bounds every coordinate.
pub fn brute_force_objective(data: &Dataset, spec: &ModelSpec, half_width: f64) -> f64 {
    let p = data.p();
    assert!(p == 1 || p == 2, "brute force supports p <= 2");
    let profile = |alpha: f64, beta: &DVector<f64>| -> f64 {
        let r = data.residuals(alpha, beta);
        let loss = match spec.loss {
            Loss::LeastSquares => r.norm_squared(),
            Loss::Huber { m } => huber_concomitant(r.as_slice(), m).map_or(f64::INFINITY, |e| e.value),
        };
        let pen = match &spec.penalty {
            Penalty::AdaptiveBerHu { lambda, l, weights } => {
                if *lambda == 0.0 {
                    0.0
                } else {
                    lambda * adaptive_berhu_concomitant(beta, weights, *l).map_or(f64::INFINITY, |p| p.value)
                }
            }
            Penalty::None => 0.0,
            Penalty::Ridge { lambda } => ridge_value(beta, *lambda),
            Penalty::AdaptiveLasso { lambda, weights } => lasso_value(beta, *lambda, weights),
            Penalty::AdaptiveElasticNet {
                lambda1,
                lambda2,
                weights,
            } => enet_value(beta, *lambda1, *lambda2, weights),
        };
        loss + pen
    };
    let ybar = data.y().mean();
    let over_alpha = |beta: &DVector<f64>| -> f64 {
        match spec.loss {
            Loss::LeastSquares => {
                let a = (data.y() - data.x() * beta).mean();
                profile(a, beta)
            }
            Loss::Huber { .. } => {
                grid_golden(|a| profile(a, beta), ybar - half_width, ybar + half_width, 21).1
            }
        }
    };
    let pts = 21;
    if p == 1 {
        grid_golden(|b| over_alpha(&DVector::from_element(1, b)), -half_width, half_width, pts).1
    } else {
        grid_golden(
            |b1| {
                grid_golden(
                    |b2| over_alpha(&DVector::from_vec(vec![b1, b2])),
                    -half_width,
                    half_width,
                    pts,
                )
                .1
            },
            -half_width,
            half_width,
            pts,
        )
        .1
    }
}

/// Random small instance: `n` in 4..=10, `p` in {1, 2}, occasional outlier.
pub fn random_small_instance(rng: &mut RngStream) -> Dataset {
    let n = 4 + (rng.random::<u32>() % 7) as usize;
    let p = 1 + (rng.random::<u32>() % 2) as usize;
    let raw = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b: Vec<f64> = (0..p).map(|_| 3.0 * (rng.open_unit() - 0.5)).collect();
    let y = DVector::from_fn(n, |i, _| {
        let mut v = 1.0 + rng.sample::<f64, _>(StandardNormal) * 0.5;
        for (j, bj) in b.iter().enumerate() {
            v += raw[(i, j)] * bj;
        }
        if rng.open_unit() < 0.1 {
            v += 10.0;
        }
        v
    });
    Dataset::from_raw(&raw, y, None).expect("finite random instance").0
}

fn brute_force_suite(opts: &CheckOptions) -> SuiteResult {
    let mut t = Tally::new(Suite::BruteForce);
    let mut rng = RngStream::new(opts.seed, 3);
    let cfg = SolverConfig::default();
    for inst in 0..opts.brute_force_instances {
        let data = random_small_instance(&mut rng);
        let p = data.p();
        let lambda = 10f64.powf(3.0 * rng.open_unit() - 1.5);
        let w = DVector::from_fn(p, |_, _| 10f64.powf(rng.open_unit() - 0.5));
        for loss in [Loss::LeastSquares, Loss::Huber { m: DEFAULT_HUBER_M }] {
            for berhu in [false, true] {
                let pen = if berhu {
                    Penalty::AdaptiveBerHu {
                        lambda,
                        l: DEFAULT_BERHU_L,
                        weights: w.clone(),
                    }
                } else {
                    Penalty::AdaptiveLasso {
                        lambda,
                        weights: w.clone(),
                    }
                };
                let spec = ModelSpec::new(loss, pen);
                let tag = format!("instance {inst} ({loss:?}, berhu = {berhu})");
                let (fit, trace) = match fit_with_trace(&data, &spec, &cfg) {
                    Ok(v) => v,
                    Err(e) => {
                        t.fail(format!("{tag}: {e}"));
                        continue;
                    }
                };
                if !fit.converged {
                    t.fail(format!("{tag}: not converged, kkt {:.3e}", fit.kkt_residual));
                    continue;
                }
                t.case(fit.kkt_residual, cfg.kkt_tol, || format!("{tag}: kkt {:.3e}", fit.kkt_residual));
                let rise = trace
                    .windows(2)
                    .map(|w| (w[1] - w[0]) / (1.0 + w[0].abs()))
                    .fold(0.0f64, f64::max);
                t.case(rise, 1e-12, || format!("{tag}: objective rose by {rise:.3e}"));
                let ols = fit_unpenalized(&data, Loss::LeastSquares).map(|f| f.beta.amax()).unwrap_or(0.0);
                let half = 3.0 * (1.0 + ols.max(fit.beta.amax()).max(fit.alpha.abs()) + data.y().amax());
                let oracle = brute_force_objective(&data, &spec, half);
                let rel = (fit.objective - oracle).abs() / (1.0 + oracle.abs());
                t.case(rel, 1e-4, || format!("{tag}: objective {} vs oracle {oracle}", fit.objective));
            }
        }
    }
    t.finish()
}

fn grouping_suite(opts: &CheckOptions) -> SuiteResult {
    let mut t = Tally::new(Suite::Grouping);
    let model = match BlockModelSpec::model(1) {
        Ok(m) => m,
        Err(e) => {
            t.fail(e.to_string());
            return t.finish();
        }
    };
    let cfg = SolverConfig::default();
    let grid = zero_log_grid(100, 1400.0).unwrap_or_default();
    for k in 0..opts.grouping_fits {
        let run = || -> Result<(usize, usize, f64)> {
            let mut rng = RngStream::new(opts.seed.wrapping_add(k as u64), 0);
            let (x, _) = generate_design(&model, 100, 1, &mut rng)?;
            let y = generate_response(&x, &model, &mut rng)?;
            let data = Dataset::new(x, y, None)?;
            let unpen = fit_unpenalized(&data, Loss::LeastSquares)?;
            let weights = adaptive_weights(&unpen.beta, 1.0, WEIGHT_CLAMP);
            let template = ModelSpec::new(
                Loss::LeastSquares,
                Penalty::AdaptiveBerHu {
                    lambda: 0.0,
                    l: DEFAULT_BERHU_L,
                    weights,
                },
            );
            let sel = select_by_bic(&data, &template, &grid, ZERO_THRESHOLD, &cfg)?;
            // the bound needs lambda > 0; take the first positive grid point otherwise
            let lambda = if sel.lambda > 0.0 { sel.lambda } else { grid[1] };
            let spec = ModelSpec::new(template.loss, template.penalty.with_lambda(lambda));
            let fit = crate::solver::fit(&data, &spec, &cfg)?;
            if fit.tau.unwrap_or(0.0) == 0.0 {
                return Ok((0, 0, f64::NEG_INFINITY));
            }
            let s = grouping_bound_all(&data, &spec, &fit)?;
            Ok((s.pairs_checked, s.violations, s.worst_excess))
        };
        match run() {
            Ok((pairs, violations, worst)) => {
                let excess = if violations > 0 { worst } else { 0.0 };
                t.case(excess, 1e-8, || format!("fit {k}: {violations} of {pairs} pairs violate the bound"));
            }
            Err(e) => t.fail(format!("fit {k}: {e}")),
        }
    }
    match duplicated_column_gap(opts.seed) {
        Ok(gap) => t.case(gap, 1e-6, || format!("duplicated columns: |w_i b_i - w_j b_j| = {gap:.3e}")),
        Err(e) => t.fail(format!("duplicated columns: {e}")),
    }
    t.finish()
}

/// Fits LS + BerHu on a design whose first two columns coincide (equal weights,
/// both coefficients in the quadratic zone) and returns `|w_1 b_1 - w_2 b_2|`.
pub fn duplicated_column_gap(seed: u64) -> Result<f64> {
    let mut rng = RngStream::new(seed, 4);
    let n = 40;
    let mut raw = DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let first = raw.column(0).into_owned();
    raw.set_column(1, &first);
    let y = DVector::from_fn(n, |i, _| {
        1.0 + 3.0 * raw[(i, 0)] + 3.0 * raw[(i, 1)] + 0.2 * raw[(i, 2)] + 0.3 * rng.sample::<f64, _>(StandardNormal)
    });
    let data = Dataset::from_raw(&raw, y, None)?.0;
    let spec = ModelSpec::new(
        Loss::LeastSquares,
        Penalty::AdaptiveBerHu {
            lambda: 1.0,
            l: DEFAULT_BERHU_L,
            weights: DVector::from_element(4, 1.0),
        },
    );
    let fit = crate::solver::fit(&data, &spec, &SolverConfig::default())?;
    let tau = fit.tau.unwrap_or(0.0);
    let edge = DEFAULT_BERHU_L * tau;
    if !(tau > 0.0 && fit.beta[0].abs() > edge && fit.beta[1].abs() > edge) {
        return Err(Error::Precondition(format!(
            "coefficients {:?} not both in the quadratic zone (edge {edge})",
            &fit.beta.as_slice()[..2]
        )));
    }
    Ok((fit.beta[0] - fit.beta[1]).abs())
}

/// Runs the selected suites in order.
pub fn run_checks(opts: &CheckOptions) -> CheckReport {
    let results: Vec<SuiteResult> = opts
        .suites
        .iter()
        .map(|s| match s {
            Suite::Variational => variational_suite(),
            Suite::Tau => tau_suite(opts),
            Suite::Scale => scale_suite(opts),
            Suite::BruteForce => brute_force_suite(opts),
            Suite::Grouping => grouping_suite(opts),
        })
        .collect();
    CheckReport {
        passed: results.iter().all(|r| r.passed),
        results,
    }
}
