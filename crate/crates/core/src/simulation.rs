//! Block-correlated simulation models and the Monte Carlo experiment runner.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{center_columns, Dataset, RngStream};
use crate::diagnostics::{rpe, selection_metrics, SelectionMetrics};
use crate::error::{param, Error, Result};
use crate::model::{FitResult, Loss, ModelSpec, Penalty, DEFAULT_BERHU_L, DEFAULT_HUBER_M};
use crate::solver::{fit_unpenalized, SolverConfig};
use crate::tuning::{
    adaptive_weights, select_by_bic, select_by_cv, zero_log_grid, ENET_LAMBDA2_GRID,
    WEIGHT_CLAMP, ZERO_THRESHOLD,
};

/// Noise law of `epsilon` in `y = alpha* + X beta* + sigma epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NoiseModel {
    /// Standard normal.
    Gaussian,
    /// `0.9 N(0, 1) + 0.1 N(0, 225)`.
    GaussianMixture,
    /// Laplace with density `exp(-|x|) / 2`, divided by `sqrt(2)`.
    DoubleExponential,
}

impl NoiseModel {
    /// One draw of `epsilon`.
    pub fn draw(&self, rng: &mut RngStream) -> f64 {
        match self {
            NoiseModel::Gaussian => rng.sample(StandardNormal),
            NoiseModel::GaussianMixture => {
                let wide = rng.open_unit() < 0.1;
                let z: f64 = rng.sample(StandardNormal);
                if wide {
                    15.0 * z
                } else {
                    z
                }
            }
            NoiseModel::DoubleExponential => {
                let u = rng.open_unit() - 0.5;
                let d = -u.signum() * (1.0 - 2.0 * u.abs()).ln();
                d / std::f64::consts::SQRT_2
            }
        }
    }
}

/// Linear model with block-diagonal Gaussian design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockModelSpec {
    pub id: u8,
    pub block_count: usize,
    pub block_size: usize,
    pub block_diag: f64,
    pub block_offdiag: f64,
    /// Size of the trailing identity block.
    pub free_count: usize,
    pub beta_star: Vec<f64>,
    pub alpha_star: f64,
    pub noise: NoiseModel,
    pub sigma: f64,
}

impl BlockModelSpec {
    /// Models 1 to 3: Gaussian (sigma 15), Gaussian mixture (sigma 3.1009) and
    /// standardized Laplace (sigma 10.6) noise.
    pub fn model(id: u8) -> Result<Self> {
        let (noise, sigma) = match id {
            1 => (NoiseModel::Gaussian, 15.0),
            2 => (NoiseModel::GaussianMixture, 3.1009),
            3 => (NoiseModel::DoubleExponential, 10.6),
            _ => return Err(param("model", format!("expected 1, 2 or 3, got {id}"))),
        };
        let mut beta_star = vec![3.0; 15];
        beta_star.extend(std::iter::repeat_n(0.0, 25));
        Ok(Self {
            id,
            block_count: 3,
            block_size: 5,
            block_diag: 1.01,
            block_offdiag: 1.0,
            free_count: 25,
            beta_star,
            alpha_star: 1.0,
            noise,
            sigma,
        })
    }

    pub fn p(&self) -> usize {
        self.block_count * self.block_size + self.free_count
    }

    pub fn beta_star(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_star)
    }

    pub fn true_support(&self) -> Vec<bool> {
        self.beta_star.iter().map(|b| *b != 0.0).collect()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut s = DMatrix::identity(p, p);
        for b in 0..self.block_count {
            let o = b * self.block_size;
            for i in 0..self.block_size {
                for j in 0..self.block_size {
                    s[(o + i, o + j)] = if i == j {
                        self.block_diag
                    } else {
                        self.block_offdiag
                    };
                }
            }
        }
        s
    }

    /// `F` with `F F' = Sigma`, from the symmetric eigendecomposition.
    pub fn covariance_factor(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.covariance());
        let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
    }
}

fn gaussian_rows(factor: &DMatrix<f64>, rows: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let p = factor.nrows();
    let z = DMatrix::from_fn(p, rows, |_, _| rng.sample::<f64, _>(StandardNormal));
    (factor * z).transpose()
}

/// Training (`n` rows) and test (`m` rows) designs drawn from `N(0, Sigma)`,
/// each centered by its own column means.
pub fn generate_design(
    model: &BlockModelSpec,
    n: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if n < 2 || m < 1 {
        return Err(Error::Precondition(format!("need n >= 2 and m >= 1, got n = {n}, m = {m}")));
    }
    let f = model.covariance_factor();
    let train = gaussian_rows(&f, n, rng);
    let test = gaussian_rows(&f, m, rng);
    Ok((center_columns(&train)?.0, center_columns(&test)?.0))
}

/// `y = alpha* + X beta* + sigma epsilon` with fresh noise.
pub fn generate_response(
    design: &DMatrix<f64>,
    model: &BlockModelSpec,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    if design.ncols() != model.p() {
        return Err(Error::Shape {
            expected: format!("{} columns", model.p()),
            found: format!("{} columns", design.ncols()),
        });
    }
    let mean = design * model.beta_star();
    Ok(DVector::from_fn(design.nrows(), |i, _| {
        let e = if model.sigma == 0.0 {
            0.0
        } else {
            model.noise.draw(rng)
        };
        model.alpha_star + mean[i] + model.sigma * e
    }))
}

/// Estimators compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    AdLasso,
    Ridge,
    AdEn,
    AdBerhu,
    HuberAdLasso,
    HuberRidge,
    HuberAdEn,
    HuberAdBerhu,
    Ols,
    Huber,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::AdLasso,
        Method::Ridge,
        Method::AdEn,
        Method::AdBerhu,
        Method::HuberAdLasso,
        Method::HuberRidge,
        Method::HuberAdEn,
        Method::HuberAdBerhu,
        Method::Ols,
        Method::Huber,
    ];
    /// The eight penalized methods.
    pub const PENALIZED: [Method; 8] = [
        Method::AdLasso,
        Method::Ridge,
        Method::AdEn,
        Method::AdBerhu,
        Method::HuberAdLasso,
        Method::HuberRidge,
        Method::HuberAdEn,
        Method::HuberAdBerhu,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::AdLasso => "ad-lasso",
            Method::Ridge => "ridge",
            Method::AdEn => "ad-en",
            Method::AdBerhu => "ad-berhu",
            Method::HuberAdLasso => "huber-ad-lasso",
            Method::HuberRidge => "huber-ridge",
            Method::HuberAdEn => "huber-ad-en",
            Method::HuberAdBerhu => "huber-ad-berhu",
            Method::Ols => "ols",
            Method::Huber => "huber",
        }
    }

    fn index(&self) -> u64 {
        Method::ALL.iter().position(|m| m == self).unwrap() as u64
    }

    pub fn is_huber(&self) -> bool {
        matches!(
            self,
            Method::HuberAdLasso
                | Method::HuberRidge
                | Method::HuberAdEn
                | Method::HuberAdBerhu
                | Method::Huber
        )
    }

    /// Whether the method performs variable selection (and gets selection metrics).
    pub fn selects(&self) -> bool {
        !matches!(
            self,
            Method::Ridge | Method::HuberRidge | Method::Ols | Method::Huber
        )
    }

    pub fn loss(&self, m: f64) -> Loss {
        if self.is_huber() {
            Loss::Huber { m }
        } else {
            Loss::LeastSquares
        }
    }

    /// Parses a comma-separated list; `all` expands to the eight penalized methods.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if tok.eq_ignore_ascii_case("all") {
                out.extend(Method::PENALIZED);
            } else {
                out.push(tok.parse()?);
            }
        }
        out.dedup();
        if out.is_empty() {
            return Err(param("methods", "no method given"));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == key)
            .ok_or_else(|| param("method", format!("unknown method '{s}'")))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// `(count, hi)` of a `{0} ∪ geometric` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub count: usize,
    pub hi: f64,
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        zero_log_grid(self.count, self.hi)
    }
}

/// Tuning and solver settings shared by every method of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub gamma: f64,
    pub huber_m: f64,
    pub berhu_l: f64,
    pub zero_threshold: f64,
    pub weight_clamp: f64,
    pub folds: usize,
    pub berhu_grid: GridSpec,
    pub lasso_grid: GridSpec,
    pub ridge_grid: GridSpec,
    pub enet_lambda1_grid: GridSpec,
    pub enet_lambda2_grid: Vec<f64>,
    pub max_sweeps: usize,
    pub objective_tol: f64,
    pub kkt_tol: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            huber_m: DEFAULT_HUBER_M,
            berhu_l: DEFAULT_BERHU_L,
            zero_threshold: ZERO_THRESHOLD,
            weight_clamp: WEIGHT_CLAMP,
            folds: 5,
            berhu_grid: GridSpec {
                count: 100,
                hi: 1400.0,
            },
            lasso_grid: GridSpec {
                count: 200,
                hi: 10_000.0,
            },
            ridge_grid: GridSpec {
                count: 100,
                hi: 1400.0,
            },
            enet_lambda1_grid: GridSpec {
                count: 25,
                hi: 5000.0,
            },
            enet_lambda2_grid: ENET_LAMBDA2_GRID.to_vec(),
            max_sweeps: 10_000,
            objective_tol: 1e-10,
            kkt_tol: 1e-6,
        }
    }
}

impl ProtocolConfig {
    /// Replaces the primary grid of every method.
    pub fn override_grids(&mut self, count: Option<usize>, hi: Option<f64>) {
        for g in [
            &mut self.berhu_grid,
            &mut self.lasso_grid,
            &mut self.ridge_grid,
            &mut self.enet_lambda1_grid,
        ] {
            if let Some(c) = count {
                g.count = c;
            }
            if let Some(h) = hi {
                g.hi = h;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(param(name, format!("must be positive and finite, got {v}")))
            }
        };
        pos("gamma", self.gamma)?;
        pos("huber_m", self.huber_m)?;
        pos("berhu_l", self.berhu_l)?;
        pos("zero_threshold", self.zero_threshold)?;
        pos("weight_clamp", self.weight_clamp)?;
        if self.folds < 2 {
            return Err(param("folds", "need at least 2"));
        }
        for g in [
            self.berhu_grid,
            self.lasso_grid,
            self.ridge_grid,
            self.enet_lambda1_grid,
        ] {
            if g.count < 2 {
                return Err(param("grid_points", "need at least 2"));
            }
            pos("grid_max", g.hi)?;
        }
        if self.enet_lambda2_grid.is_empty() {
            return Err(param("enet_lambda2_grid", "must be nonempty"));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_sweeps: self.max_sweeps,
            objective_tol: self.objective_tol,
            kkt_tol: self.kkt_tol,
            ..SolverConfig::default()
        }
    }
}

/// A tuned fit of one method.
#[derive(Debug, Clone)]
pub struct MethodFit {
    pub method: Method,
    pub spec: ModelSpec,
    pub fit: FitResult,
    pub lambda: Option<f64>,
    pub lambda2: Option<f64>,
    pub warnings: Vec<String>,
}

/// Builds adaptive weights from the matching unpenalized estimator, tunes by
/// BIC (lasso, BerHu) or k-fold CV (ridge, elastic net) and returns the final fit.
pub fn fit_method(
    data: &Dataset,
    method: Method,
    protocol: &ProtocolConfig,
    rng: &mut RngStream,
) -> Result<MethodFit> {
    let loss = method.loss(protocol.huber_m);
    let cfg = protocol.solver();
    let unpen = fit_unpenalized(data, loss)?;
    let weights = adaptive_weights(&unpen.beta, protocol.gamma, protocol.weight_clamp);
    let done = |spec: ModelSpec, fit, lambda, lambda2, warnings| MethodFit {
        method,
        spec,
        fit,
        lambda,
        lambda2,
        warnings,
    };
    match method {
        Method::Ols | Method::Huber => Ok(done(
            ModelSpec::new(loss, Penalty::None),
            unpen,
            None,
            None,
            Vec::new(),
        )),
        Method::AdLasso | Method::HuberAdLasso | Method::AdBerhu | Method::HuberAdBerhu => {
            let (pen, grid) = if matches!(method, Method::AdLasso | Method::HuberAdLasso) {
                (
                    Penalty::AdaptiveLasso {
                        lambda: 0.0,
                        weights,
                    },
                    protocol.lasso_grid,
                )
            } else {
                (
                    Penalty::AdaptiveBerHu {
                        lambda: 0.0,
                        l: protocol.berhu_l,
                        weights,
                    },
                    protocol.berhu_grid,
                )
            };
            let template = ModelSpec::new(loss, pen);
            let sel = select_by_bic(data, &template, &grid.values()?, protocol.zero_threshold, &cfg)?;
            let warnings = if sel.failures > 0 {
                vec![format!("{} grid fits failed", sel.failures)]
            } else {
                Vec::new()
            };
            let spec = ModelSpec::new(loss, template.penalty.with_lambda(sel.lambda));
            Ok(done(spec, sel.fit, Some(sel.lambda), None, warnings))
        }
        Method::Ridge | Method::HuberRidge => {
            let template = ModelSpec::new(loss, Penalty::Ridge { lambda: 0.0 });
            let grid = protocol.ridge_grid.values()?;
            let sel = select_by_cv(data, &template, &grid, None, protocol.folds, rng, &cfg)?;
            let spec = ModelSpec::new(loss, template.penalty.with_lambda(sel.lambda));
            Ok(done(spec, sel.fit, Some(sel.lambda), None, sel.warnings))
        }
        Method::AdEn | Method::HuberAdEn => {
            let template = ModelSpec::new(
                loss,
                Penalty::AdaptiveElasticNet {
                    lambda1: 0.0,
                    lambda2: 0.0,
                    weights,
                },
            );
            let grid = protocol.enet_lambda1_grid.values()?;
            let sel = select_by_cv(
                data,
                &template,
                &grid,
                Some(&protocol.enet_lambda2_grid),
                protocol.folds,
                rng,
                &cfg,
            )?;
            let spec = ModelSpec::new(
                loss,
                Penalty::AdaptiveElasticNet {
                    lambda1: sel.lambda,
                    lambda2: sel.lambda2.unwrap_or(0.0),
                    weights: template.penalty.weights().cloned().unwrap_or_default(),
                },
            );
            Ok(done(spec, sel.fit, Some(sel.lambda), sel.lambda2, sel.warnings))
        }
    }
}

/// Stream id for the tuning randomness of `method` in replication `rep`.
pub fn tuning_stream(seed: u64, rep: usize, method: Method) -> RngStream {
    RngStream::new(seed, ((method.index() + 1) << 32) | (rep as u64 + 1))
}

/// One row of per-replication output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub lambda: Option<f64>,
    pub lambda2: Option<f64>,
    pub tau: Option<f64>,
    pub s: Option<f64>,
    pub rpe: f64,
    pub beta1: f64,
    pub selected: usize,
    pub converged: bool,
    pub sweeps: usize,
    pub kkt_residual: f64,
}

/// Five-number summary with Tukey outliers (beyond 1.5 IQR from the quartiles).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    Some(FiveNumber {
        min: v[0],
        q1,
        median: quantile(&v, 0.5),
        q3,
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
        outliers: v
            .iter()
            .copied()
            .filter(|x| *x < q1 - 1.5 * iqr || *x > q3 + 1.5 * iqr)
            .collect(),
    })
}

/// Aggregated results of one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    /// Absent for methods that do not select variables.
    pub selection: Option<SelectionMetrics>,
    pub rpe: Vec<f64>,
    pub rpe_summary: Option<FiveNumber>,
    pub beta1: Vec<f64>,
    pub beta1_summary: Option<FiveNumber>,
    pub replications: Vec<ReplicationRecord>,
    pub failures: Vec<String>,
}

/// Notes describing how ambiguous quantities are computed.
pub fn provenance_notes() -> Vec<String> {
    vec![
        "RPE = mean over the fixed test design of ((a - a*) + x'(b - b*))^2 / sigma^2".into(),
        "lambda grids are {0} followed by count-1 geometric points from hi*1e-4 to hi".into(),
        "lasso and BerHu tuned by BIC (Huber BIC uses log(L_H) + k log(n)/(2n)); ridge and elastic net by 5-fold CV on squared prediction error".into(),
        "adaptive elastic net: weights act on the l1 term only; naive (unrescaled) form".into(),
        "designs are column-centered only; no variance normalization".into(),
        "a coefficient is zero iff |b| < zero_threshold".into(),
    ]
}

/// Everything a simulation run produces. Wall-clock time is kept out of the
/// serialized form so reports are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub model: BlockModelSpec,
    pub n: usize,
    pub test_size: usize,
    pub replications: usize,
    pub seed: u64,
    pub protocol: ProtocolConfig,
    pub notes: Vec<String>,
    pub methods: Vec<MethodReport>,
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl ExperimentReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// Experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: BlockModelSpec,
    pub n: usize,
    /// Size of the fixed test design.
    pub test_size: usize,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    pub protocol: ProtocolConfig,
}

impl ExperimentConfig {
    pub fn new(model: BlockModelSpec, n: usize, methods: Vec<Method>, replications: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            test_size: 10_000,
            methods,
            replications,
            seed,
            protocol: ProtocolConfig::default(),
        }
    }
}

type RepOutcome = Vec<std::result::Result<(ReplicationRecord, DVector<f64>), String>>;

fn run_replication(
    cfg: &ExperimentConfig,
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    rep: usize,
) -> RepOutcome {
    let mut noise = RngStream::new(cfg.seed, rep as u64 + 1);
    let y = match generate_response(train, &cfg.model, &mut noise) {
        Ok(y) => y,
        Err(e) => return vec![Err(e.to_string()); cfg.methods.len()],
    };
    let data = match Dataset::new(train.clone(), y, None) {
        Ok(d) => d,
        Err(e) => return vec![Err(e.to_string()); cfg.methods.len()],
    };
    let beta_star = cfg.model.beta_star();
    let sigma = if cfg.model.sigma > 0.0 {
        cfg.model.sigma
    } else {
        1.0
    };
    cfg.methods
        .iter()
        .map(|&m| {
            let mut rng = tuning_stream(cfg.seed, rep, m);
            let mf = fit_method(&data, m, &cfg.protocol, &mut rng).map_err(|e| e.to_string())?;
            let f = &mf.fit;
            let record = ReplicationRecord {
                replication: rep,
                lambda: mf.lambda,
                lambda2: mf.lambda2,
                tau: f.tau,
                s: f.s,
                rpe: rpe(f.alpha, &f.beta, cfg.model.alpha_star, &beta_star, test, sigma),
                beta1: f.beta[0],
                selected: f.support_size(cfg.protocol.zero_threshold),
                converged: f.converged,
                sweeps: f.sweeps,
                kkt_residual: f.kkt_residual,
            };
            Ok((record, f.beta.clone()))
        })
        .collect()
}

/// Runs the Monte Carlo study: one fixed train/test design from stream
/// `(seed, 0)`, then for each replication `r` fresh noise from stream
/// `(seed, r + 1)`, and per method tuning, fitting and scoring.
/// Replications run in parallel on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.protocol.validate()?;
    if cfg.replications == 0 {
        return Err(param("reps", "need at least one replication"));
    }
    if cfg.methods.is_empty() {
        return Err(param("methods", "no method given"));
    }
    let mut design_rng = RngStream::new(cfg.seed, 0);
    let (train, test) = generate_design(&cfg.model, cfg.n, cfg.test_size, &mut design_rng)?;

    let outcomes: Vec<RepOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, &train, &test, r))
        .collect();

    let support = cfg.model.true_support();
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let mut records = Vec::new();
            let mut betas = Vec::new();
            let mut failures = Vec::new();
            for (r, out) in outcomes.iter().enumerate() {
                match &out[k] {
                    Ok((rec, b)) => {
                        records.push(rec.clone());
                        betas.push(b.clone());
                    }
                    Err(e) => failures.push(format!("replication {r}: {e}")),
                }
            }
            let rpe: Vec<f64> = records.iter().map(|r| r.rpe).collect();
            let beta1: Vec<f64> = records.iter().map(|r| r.beta1).collect();
            MethodReport {
                method: m,
                selection: (m.selects() && !betas.is_empty())
                    .then(|| selection_metrics(&betas, &support, cfg.protocol.zero_threshold)),
                rpe_summary: five_number(&rpe),
                beta1_summary: five_number(&beta1),
                rpe,
                beta1,
                replications: records,
                failures,
            }
        })
        .collect();

    Ok(ExperimentReport {
        model: cfg.model.clone(),
        n: cfg.n,
        test_size: cfg.test_size,
        replications: cfg.replications,
        seed: cfg.seed,
        protocol: cfg.protocol.clone(),
        notes: provenance_notes(),
        methods,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_is_positive_definite_and_factored() {
        let m = BlockModelSpec::model(1).unwrap();
        let s = m.covariance();
        let f = m.covariance_factor();
        assert!((&f * f.transpose() - &s).amax() < 1e-12);
        let eig = SymmetricEigen::new(s);
        assert!(eig.eigenvalues.min() > 0.009);
    }

    #[test]
    fn models_and_method_names() {
        assert!(BlockModelSpec::model(4).is_err());
        let m2 = BlockModelSpec::model(2).unwrap();
        assert!((m2.sigma * (1.0f64 + 0.1 * 224.0).sqrt() - 15.0).abs() < 1e-3);
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lasso".parse::<Method>().is_err());
        assert_eq!(Method::parse_list("all").unwrap().len(), 8);
        assert_eq!(
            Method::parse_list("ad-berhu, ridge").unwrap(),
            vec![Method::AdBerhu, Method::Ridge]
        );
    }

    #[test]
    fn noiseless_response() {
        let m = BlockModelSpec {
            sigma: 0.0,
            ..BlockModelSpec::model(1).unwrap()
        };
        let mut rng = RngStream::new(1, 0);
        let (x, _) = generate_design(&m, 20, 5, &mut rng).unwrap();
        let y = generate_response(&x, &m, &mut rng).unwrap();
        let expect = (&x * m.beta_star()).add_scalar(1.0);
        assert_eq!(y, expect);
    }

    #[test]
    fn design_is_centered_and_reproducible() {
        let m = BlockModelSpec::model(1).unwrap();
        let (a, b) = generate_design(&m, 30, 7, &mut RngStream::new(5, 0)).unwrap();
        let (a2, b2) = generate_design(&m, 30, 7, &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        for c in a.column_iter().chain(b.column_iter()) {
            assert!(c.sum().abs() < 1e-10);
        }
    }

    #[test]
    fn five_number_summary() {
        let s = five_number(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 100.0));
        assert_eq!(s.outliers, vec![100.0]);
        assert!(five_number(&[]).is_none());
    }
}
