use std::path::PathBuf;

use berhu::checks::{run_checks, CheckOptions, CheckReport, Fault, Suite};
use berhu::diagnostics::GroupingSummary;
use berhu::simulation::{fit_method, provenance_notes, FiveNumber};
use berhu::tuning::adaptive_weights;
use berhu::{
    fit as fit_model, fit_unpenalized, grouping_bound_all, kkt_check, load_table, resampling_study,
    run_experiment, BlockModelSpec, Dataset, ExperimentConfig, ExperimentReport, FitResult, KktReport,
    Loss, Method, ModelSpec, Penalty, ProtocolConfig, ResamplingConfig, ResamplingReport, RngStream,
    TabularSource,
};
use serde::Serialize;

use crate::args::{CheckArgs, FaultArg, FitArgs, ProstateArgs, ProtocolArgs, SimulateArgs};
use crate::output::{csv, num, opt, table, Bundle, CliError, CliResult, Document};
use crate::{EXIT_CHECK_FAILED, EXIT_NOT_CONVERGED, EXIT_OK};

/// Fully resolved settings of a run, embedded in every report.
#[derive(Debug, Default, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictors: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_protocol: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<Suite>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
    pub seed: u64,
    /// Worker threads; `null` means one per core.
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolConfig>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn protocol(a: &ProtocolArgs) -> CliResult<ProtocolConfig> {
    let mut p = ProtocolConfig {
        gamma: a.gamma,
        huber_m: a.huber_m,
        berhu_l: a.berhu_l,
        max_sweeps: a.max_sweeps,
        ..ProtocolConfig::default()
    };
    p.override_grids(a.grid_points, a.grid_max);
    if a.max_sweeps == 0 {
        return Err(usage("--max-sweeps must be at least 1"));
    }
    p.validate()?;
    Ok(p)
}

fn set_jobs(jobs: Option<usize>) -> CliResult<()> {
    match jobs {
        None => Ok(()),
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Io(format!("cannot start {k} worker threads: {e}"))),
    }
}

fn check_finite(name: &str, v: Option<f64>) -> CliResult<()> {
    match v {
        Some(x) if !(x.is_finite() && x >= 0.0) => {
            Err(usage(format!("--{name} must be finite and nonnegative, got {x}")))
        }
        _ => Ok(()),
    }
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Serialize)]
struct Hyperparameters {
    lambda: Option<f64>,
    lambda2: Option<f64>,
    tuned: bool,
    gamma: f64,
    huber_m: Option<f64>,
    berhu_l: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FitOutput {
    method: Method,
    rows: usize,
    variables: Vec<String>,
    column_means: Vec<f64>,
    /// Intercept of the centered design.
    alpha: f64,
    /// Intercept on the original predictor scale.
    intercept: f64,
    beta: Vec<f64>,
    s: Option<f64>,
    tau: Option<f64>,
    objective: f64,
    sweeps: usize,
    converged: bool,
    kkt_residual: f64,
    rank_deficient: bool,
    kkt: KktReport,
    hyperparameters: Hyperparameters,
    weights: Option<Vec<f64>>,
    grouping: Option<GroupingSummary>,
    warnings: Vec<String>,
}

/// Spec of `method` at fixed penalty levels, with adaptive weights from the
/// unpenalized fit of the same loss.
fn fixed_spec(
    data: &Dataset,
    method: Method,
    lambda: f64,
    lambda2: f64,
    p: &ProtocolConfig,
) -> berhu::Result<ModelSpec> {
    let loss = method.loss(p.huber_m);
    let weights = || -> berhu::Result<_> {
        let unpen = fit_unpenalized(data, loss)?;
        Ok(adaptive_weights(&unpen.beta, p.gamma, p.weight_clamp))
    };
    let penalty = match method {
        Method::Ols | Method::Huber => Penalty::None,
        Method::Ridge | Method::HuberRidge => Penalty::Ridge { lambda },
        Method::AdLasso | Method::HuberAdLasso => Penalty::AdaptiveLasso {
            lambda,
            weights: weights()?,
        },
        Method::AdEn | Method::HuberAdEn => Penalty::AdaptiveElasticNet {
            lambda1: lambda,
            lambda2,
            weights: weights()?,
        },
        Method::AdBerhu | Method::HuberAdBerhu => Penalty::AdaptiveBerHu {
            lambda,
            l: p.berhu_l,
            weights: weights()?,
        },
    };
    Ok(ModelSpec::new(loss, penalty))
}

pub fn fit(a: FitArgs) -> CliResult<u8> {
    let proto = protocol(&a.protocol)?;
    check_finite("lambda", a.lambda)?;
    check_finite("lambda2", a.lambda2)?;
    let unpenalized = matches!(a.method, Method::Ols | Method::Huber);
    if unpenalized && (a.lambda.is_some() || a.lambda2.is_some()) {
        return Err(usage(format!("method {} takes no penalty level", a.method)));
    }
    if a.lambda2.is_some() && !matches!(a.method, Method::AdEn | Method::HuberAdEn) {
        return Err(usage("--lambda2 applies to ad-en and huber-ad-en only"));
    }
    if a.lambda2.is_some() && a.lambda.is_none() {
        return Err(usage("--lambda2 needs --lambda"));
    }
    let src = TabularSource {
        path: a.input.clone(),
        delimiter: berhu::ingest::Delimiter::Auto,
        response: a.response.clone(),
        predictors: a.predictors.clone(),
    };
    let table_data = load_table(&src)?;
    let data = &table_data.data;

    let mut warnings = Vec::new();
    let (spec, fitted, lambda, lambda2, tuned) = match a.lambda {
        Some(l) if !unpenalized => {
            let l2 = a.lambda2.unwrap_or(0.0);
            let spec = fixed_spec(data, a.method, l, l2, &proto)?;
            let f = fit_model(data, &spec, &proto.solver())?;
            let l2 = matches!(a.method, Method::AdEn | Method::HuberAdEn).then_some(l2);
            (spec, f, Some(l), l2, false)
        }
        _ => {
            let mut rng = RngStream::new(a.seed, 0);
            let mf = fit_method(data, a.method, &proto, &mut rng)?;
            warnings.extend(mf.warnings);
            (mf.spec, mf.fit, mf.lambda, mf.lambda2, !unpenalized)
        }
    };
    let kkt = kkt_check(data, &spec, &fitted)?;
    let grouping = grouping_summary(data, &spec, &fitted)?;
    if !fitted.converged {
        warnings.push(format!(
            "solver stopped after {} sweeps without converging",
            fitted.sweeps
        ));
    }
    let variables: Vec<String> = data.names().map(<[String]>::to_vec).unwrap_or_default();
    let intercept = fitted.alpha - table_data.means.dot(&fitted.beta);
    let out = FitOutput {
        method: a.method,
        rows: table_data.rows,
        variables: variables.clone(),
        column_means: table_data.means.iter().copied().collect(),
        alpha: fitted.alpha,
        intercept,
        beta: fitted.beta.iter().copied().collect(),
        s: fitted.s,
        tau: fitted.tau,
        objective: fitted.objective,
        sweeps: fitted.sweeps,
        converged: fitted.converged,
        kkt_residual: fitted.kkt_residual,
        rank_deficient: fitted.rank_deficient,
        kkt,
        hyperparameters: Hyperparameters {
            lambda,
            lambda2,
            tuned,
            gamma: proto.gamma,
            huber_m: matches!(spec.loss, Loss::Huber { .. }).then_some(proto.huber_m),
            berhu_l: spec.penalty.is_berhu().then_some(proto.berhu_l),
        },
        weights: spec.penalty.weights().map(|w| w.iter().copied().collect()),
        grouping,
        warnings,
    };
    let config = RunConfig {
        subcommand: "fit",
        input: Some(a.input),
        response: Some(a.response),
        predictors: Some(variables),
        method: Some(a.method),
        lambda: a.lambda,
        lambda2: a.lambda2,
        seed: a.seed,
        protocol: Some(proto),
        ..RunConfig::default()
    };
    let doc = Document::new("fit", &config, vec![a.seed], provenance_notes(), &out);
    let bundle = Bundle {
        json: doc.to_json()?,
        text: render_fit(&out),
        extra: Vec::new(),
    };
    bundle.emit(a.output.as_deref(), a.format)?;
    if out.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: fit did not converge (result written, converged = false)");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn grouping_summary(data: &Dataset, spec: &ModelSpec, f: &FitResult) -> CliResult<Option<GroupingSummary>> {
    let applies = spec.loss == Loss::LeastSquares
        && matches!(spec.penalty, Penalty::AdaptiveBerHu { lambda, .. } if lambda > 0.0)
        && f.tau.is_some_and(|t| t > 0.0);
    if !applies {
        return Ok(None);
    }
    Ok(Some(grouping_bound_all(data, spec, f)?))
}

fn render_fit(o: &FitOutput) -> String {
    let mut s = format!("berhu {} fit: {}\n", env!("CARGO_PKG_VERSION"), o.method);
    s.push_str(&format!(
        "rows {}  lambda {}  lambda2 {}  tuned {}\n",
        o.rows,
        opt(o.hyperparameters.lambda),
        opt(o.hyperparameters.lambda2),
        o.hyperparameters.tuned
    ));
    s.push_str(&format!(
        "objective {}  sweeps {}  converged {}  kkt {}\n",
        num(o.objective),
        o.sweeps,
        o.converged,
        num(o.kkt.max_residual)
    ));
    s.push_str(&format!("s {}  tau {}\n\n", opt(o.s), opt(o.tau)));
    let mut rows = vec![vec!["(intercept)".to_string(), num(o.intercept), "-".into()]];
    for (k, b) in o.beta.iter().enumerate() {
        let name = o.variables.get(k).cloned().unwrap_or_else(|| format!("x{}", k + 1));
        let w = o.weights.as_ref().map(|w| num(w[k])).unwrap_or_else(|| "-".into());
        rows.push(vec![name, num(*b), w]);
    }
    s.push_str(&table(&["variable", "coefficient", "weight"], &rows));
    if let Some(g) = &o.grouping {
        s.push_str(&format!(
            "\ngrouping bound: {} pairs, {} violations, worst excess {}\n",
            g.pairs_checked,
            g.violations,
            if g.pairs_checked > 0 {
                num(g.worst_excess)
            } else {
                "-".into()
            }
        ));
    }
    for w in &o.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

// ---------------------------------------------------------------- simulate

pub fn simulate(a: SimulateArgs) -> CliResult<u8> {
    let proto = protocol(&a.protocol)?;
    let model = BlockModelSpec::model(a.model)?;
    let reps = a.reps.unwrap_or(if a.full_protocol { 100 } else { 20 });
    if reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if a.n <= model.p() + 1 {
        return Err(usage(format!(
            "--n must exceed {} for model {} (p = {})",
            model.p() + 1,
            a.model,
            model.p()
        )));
    }
    if a.test_size == 0 {
        return Err(usage("--test-size must be at least 1"));
    }
    if ![100, 200, 400].contains(&a.n) {
        eprintln!("warning: n = {} is outside the studied sizes 100, 200, 400", a.n);
    }
    set_jobs(a.jobs)?;
    let cfg = ExperimentConfig {
        test_size: a.test_size,
        protocol: proto.clone(),
        ..ExperimentConfig::new(model, a.n, a.methods.0.clone(), reps, a.seed)
    };
    let report = run_experiment(&cfg)?;
    let config = RunConfig {
        subcommand: "simulate",
        methods: Some(a.methods.0),
        model: Some(a.model),
        n: Some(a.n),
        test_size: Some(a.test_size),
        replications: Some(reps),
        full_protocol: Some(a.full_protocol),
        seed: a.seed,
        jobs: a.jobs,
        protocol: Some(proto),
        ..RunConfig::default()
    };
    let doc = Document::new("simulate", &config, vec![a.seed], report.notes.clone(), &report);
    let bundle = Bundle {
        json: doc.to_json()?,
        text: render_simulation(&report),
        extra: vec![
            ("selection.csv", selection_csv(&report)),
            ("rpe_boxplot.csv", boxplot_csv(&report, |m| m.rpe_summary.as_ref())),
            ("beta1_boxplot.csv", boxplot_csv(&report, |m| m.beta1_summary.as_ref())),
            ("replications.csv", replications_csv(&report)),
        ],
    };
    bundle.emit(a.output.as_deref(), a.format)?;
    Ok(EXIT_OK)
}

const SELECTION_HEADER: [&str; 7] = ["method", "C", "O", "U", "Z", "CZ", "CNZ"];

fn selection_rows(r: &ExperimentReport) -> Vec<Vec<String>> {
    r.methods
        .iter()
        .filter_map(|m| {
            let s = m.selection?;
            Some(vec![
                m.method.to_string(),
                s.c.to_string(),
                s.o.to_string(),
                s.u.to_string(),
                format!("{:.2}", s.z),
                format!("{:.2}", s.cz),
                format!("{:.2}", s.cnz),
            ])
        })
        .collect()
}

fn selection_csv(r: &ExperimentReport) -> String {
    csv(&SELECTION_HEADER, &selection_rows(r))
}

fn five_cells(f: Option<&FiveNumber>) -> Vec<String> {
    match f {
        Some(f) => vec![
            num(f.min),
            num(f.q1),
            num(f.median),
            num(f.q3),
            num(f.max),
            num(f.mean),
        ],
        None => vec!["-".into(); 6],
    }
}

fn boxplot_csv<F>(r: &ExperimentReport, pick: F) -> String
where
    F: Fn(&berhu::simulation::MethodReport) -> Option<&FiveNumber>,
{
    let rows: Vec<Vec<String>> = r
        .methods
        .iter()
        .map(|m| {
            let f = pick(m);
            let mut row = vec![m.method.to_string()];
            match f {
                Some(f) => {
                    row.extend(
                        [f.min, f.q1, f.median, f.q3, f.max, f.mean]
                            .iter()
                            .map(|v| format!("{v:e}")),
                    );
                    row.push(
                        f.outliers
                            .iter()
                            .map(|v| format!("{v:e}"))
                            .collect::<Vec<_>>()
                            .join(";"),
                    );
                }
                None => row.extend(std::iter::repeat_n(String::new(), 7)),
            }
            row
        })
        .collect();
    csv(
        &["method", "min", "q1", "median", "q3", "max", "mean", "outliers"],
        &rows,
    )
}

fn replications_csv(r: &ExperimentReport) -> String {
    let mut rows = Vec::new();
    for m in &r.methods {
        for rec in &m.replications {
            rows.push(vec![
                m.method.to_string(),
                rec.replication.to_string(),
                format!("{:e}", rec.rpe),
                format!("{:e}", rec.beta1),
                rec.selected.to_string(),
                rec.lambda.map(|v| format!("{v:e}")).unwrap_or_default(),
                rec.converged.to_string(),
            ]);
        }
    }
    csv(
        &["method", "replication", "rpe", "beta1", "selected", "lambda", "converged"],
        &rows,
    )
}

fn render_simulation(r: &ExperimentReport) -> String {
    let mut s = format!(
        "berhu {} simulate: model {} (p = {}), n = {}, {} replications, seed {}\n\n",
        env!("CARGO_PKG_VERSION"),
        r.model.id,
        r.model.p(),
        r.n,
        r.replications,
        r.seed
    );
    let sel = selection_rows(r);
    if !sel.is_empty() {
        s.push_str("selection\n");
        s.push_str(&table(&SELECTION_HEADER, &sel));
        s.push('\n');
    }
    let header = ["method", "min", "q1", "median", "q3", "max", "mean"];
    for (title, pick) in [
        ("relative prediction error", 0),
        ("first coefficient estimate", 1),
    ] {
        let rows: Vec<Vec<String>> = r
            .methods
            .iter()
            .map(|m| {
                let mut row = vec![m.method.to_string()];
                row.extend(five_cells(if pick == 0 {
                    m.rpe_summary.as_ref()
                } else {
                    m.beta1_summary.as_ref()
                }));
                row
            })
            .collect();
        s.push_str(title);
        s.push('\n');
        s.push_str(&table(&header, &rows));
        s.push('\n');
    }
    for m in &r.methods {
        let unconverged = m.replications.iter().filter(|x| !x.converged).count();
        if unconverged > 0 {
            s.push_str(&format!("{}: {} fits did not converge\n", m.method, unconverged));
        }
        for f in &m.failures {
            s.push_str(&format!("{}: failure: {}\n", m.method, f));
        }
    }
    s
}

// ---------------------------------------------------------------- prostate

pub fn prostate(a: ProstateArgs) -> CliResult<u8> {
    let proto = protocol(&a.protocol)?;
    if a.splits == 0 {
        return Err(usage("--splits must be at least 1"));
    }
    let src = TabularSource::prostate(&a.input);
    let table_data = load_table(&src)?;
    let n = table_data.rows;
    if a.train_size < 3 || a.train_size >= n {
        return Err(usage(format!(
            "--train-size must be between 3 and {} for {} rows",
            n - 1,
            n
        )));
    }
    set_jobs(a.jobs)?;
    let cfg = ResamplingConfig {
        splits: a.splits,
        train_size: a.train_size,
        protocol: proto.clone(),
        ..ResamplingConfig::new(a.methods.0.clone(), a.seed)
    };
    let report = resampling_study(&table_data.data, &cfg)?;
    let config = RunConfig {
        subcommand: "prostate",
        input: Some(a.input),
        response: Some(src.response.clone()),
        predictors: Some(src.predictors.clone()),
        methods: Some(a.methods.0),
        splits: Some(a.splits),
        train_size: Some(a.train_size),
        full_protocol: Some(a.full_protocol),
        seed: a.seed,
        jobs: a.jobs,
        protocol: Some(proto),
        ..RunConfig::default()
    };
    let doc = Document::new("prostate", &config, vec![a.seed], report.notes.clone(), &report);
    let bundle = Bundle {
        json: doc.to_json()?,
        text: render_prostate(&report),
        extra: vec![("selection_counts.csv", selection_counts_csv(&report))],
    };
    bundle.emit(a.output.as_deref(), a.format)?;
    Ok(EXIT_OK)
}

fn mean_std_cell(v: Option<berhu::ingest::MeanStd>) -> String {
    match v {
        Some(m) => format!("{} ({})", num(m.mean), num(m.std)),
        None => "-".into(),
    }
}

fn render_prostate(r: &ResamplingReport) -> String {
    let mut s = format!(
        "berhu {} prostate: {} rows, {} splits of {} train / {} test, seed {}\n\n",
        env!("CARGO_PKG_VERSION"),
        r.rows,
        r.splits,
        r.train_size,
        r.test_size,
        r.seed
    );
    s.push_str("mean (std) over splits\n");
    let rows: Vec<Vec<String>> = r
        .methods
        .iter()
        .map(|m| {
            vec![
                m.method.to_string(),
                mean_std_cell(m.lambda),
                mean_std_cell(m.lambda2),
                mean_std_cell(m.mse),
                mean_std_cell(m.normalized_mse),
                mean_std_cell(m.selected_count),
            ]
        })
        .collect();
    s.push_str(&table(
        &["method", "lambda", "lambda2", "mse", "normalized mse", "selected"],
        &rows,
    ));
    s.push_str("\nselection counts\n");
    let mut header = vec!["method"];
    header.extend(r.variables.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = r
        .methods
        .iter()
        .filter(|m| m.method.selects())
        .map(|m| {
            let mut row = vec![m.method.to_string()];
            row.extend(m.selection_counts.iter().map(usize::to_string));
            row
        })
        .collect();
    s.push_str(&table(&header, &rows));
    if !r.retries.is_empty() {
        s.push_str(&format!("\n{} splits redrawn\n", r.retries.len()));
    }
    for m in &r.methods {
        for f in &m.failures {
            s.push_str(&format!("{}: failure: {}\n", m.method, f));
        }
    }
    s
}

fn selection_counts_csv(r: &ResamplingReport) -> String {
    let mut rows = Vec::new();
    for m in r.methods.iter().filter(|m| m.method.selects()) {
        for (v, c) in r.variables.iter().zip(&m.selection_counts) {
            rows.push(vec![m.method.to_string(), v.clone(), c.to_string()]);
        }
    }
    csv(&["method", "variable", "count"], &rows)
}

// ---------------------------------------------------------------- check

pub fn check(a: CheckArgs) -> CliResult<u8> {
    set_jobs(a.jobs)?;
    let fault = a.inject_fault.map(|f| match f {
        FaultArg::Tau => Fault::PerturbTau,
    });
    let opts = CheckOptions {
        suites: a.suites.0.clone(),
        seed: a.seed,
        fault,
        ..CheckOptions::default()
    };
    let report = run_checks(&opts);
    let config = RunConfig {
        subcommand: "check",
        suites: Some(a.suites.0),
        fault,
        seed: a.seed,
        jobs: a.jobs,
        ..RunConfig::default()
    };
    let notes = vec![
        "each suite compares a closed-form or scan result with an independent search".to_string(),
    ];
    let doc = Document::new("check", &config, vec![a.seed], notes, &report);
    let text = render_check(&report);
    let bundle = Bundle {
        json: doc.to_json()?,
        text: text.clone(),
        extra: Vec::new(),
    };
    if a.output.is_some() {
        print!("{text}");
    }
    bundle.emit(a.output.as_deref(), a.format)?;
    match report.first_failure() {
        None => Ok(EXIT_OK),
        Some(f) => {
            eprintln!(
                "check suite '{}' failed: {}",
                f.suite,
                f.first_failure.as_deref().unwrap_or("no detail")
            );
            Ok(EXIT_CHECK_FAILED)
        }
    }
}

fn render_check(r: &CheckReport) -> String {
    let rows: Vec<Vec<String>> = r
        .results
        .iter()
        .map(|s| {
            vec![
                s.suite.to_string(),
                if s.passed { "pass" } else { "FAIL" }.to_string(),
                s.cases.to_string(),
                s.failures.to_string(),
                num(s.worst),
            ]
        })
        .collect();
    let mut s = table(&["suite", "result", "cases", "failures", "worst"], &rows);
    s.push_str(if r.passed {
        "all suites passed\n"
    } else {
        "some suites failed\n"
    });
    s
}
