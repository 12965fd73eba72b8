//! Delimited-table loading and the random-split resampling study.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{predict, Dataset, RngStream};
use crate::error::{param, Error, Result};
use crate::simulation::{fit_method, provenance_notes, tuning_stream, Method, ProtocolConfig};

/// Column separator of an input table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Delimiter {
    Comma,
    Whitespace,
    /// Comma if the header line contains one, whitespace otherwise.
    Auto,
}

/// Where to read a regression table from. An empty predictor list selects
/// every column other than the response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabularSource {
    pub path: PathBuf,
    pub delimiter: Delimiter,
    pub response: String,
    pub predictors: Vec<String>,
}

/// The eight clinical covariates of the prostate data.
pub const PROSTATE_PREDICTORS: [&str; 8] = [
    "lcavol", "lweight", "age", "lbph", "svi", "lcp", "gleason", "pgg45",
];
pub const PROSTATE_RESPONSE: &str = "lpsa";

impl TabularSource {
    pub fn prostate(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            delimiter: Delimiter::Auto,
            response: PROSTATE_RESPONSE.into(),
            predictors: PROSTATE_PREDICTORS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.predictors.contains(&self.response) {
            return Err(param("predictors", "response listed among predictors"));
        }
        for (k, a) in self.predictors.iter().enumerate() {
            if self.predictors[..k].contains(a) {
                return Err(param("predictors", format!("duplicate column '{a}'")));
            }
        }
        Ok(())
    }
}

/// A loaded table: centered dataset plus the removed column means.
#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub data: Dataset,
    pub means: DVector<f64>,
    pub rows: usize,
}

fn read_records(path: &Path, delimiter: Delimiter) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let comma = match delimiter {
        Delimiter::Comma => true,
        Delimiter::Whitespace => false,
        Delimiter::Auto => first.contains(','),
    };
    if comma {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                column: String::new(),
                reason: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                row: k + 2,
                column: String::new(),
                reason: e.to_string(),
            })?;
            if rec.iter().all(|c| c.is_empty()) {
                continue;
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok((header, rows))
    } else {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default();
        let rows = lines
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect();
        Ok((header, rows))
    }
}

/// Reads the response and predictor columns of a delimited table with a header
/// row, and centers the predictors. A leading unnamed row-label column (one
/// more field per row than header names) is skipped.
pub fn load_table(src: &TabularSource) -> Result<LoadedTable> {
    src.validate()?;
    let (mut header, rows) = read_records(&src.path, src.delimiter)?;
    if header.first().is_some_and(|h| h.is_empty()) {
        header.remove(0);
        // row labels under an empty header name
        return finish(src, &header, rows, 1);
    }
    let offset = match rows.first() {
        Some(r) if r.len() == header.len() + 1 => 1,
        _ => 0,
    };
    finish(src, &header, rows, offset)
}

fn finish(
    src: &TabularSource,
    header: &[String],
    rows: Vec<Vec<String>>,
    offset: usize,
) -> Result<LoadedTable> {
    let index = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let yi = index(&src.response)?;
    let names: Vec<String> = if src.predictors.is_empty() {
        header.iter().filter(|h| **h != src.response).cloned().collect()
    } else {
        src.predictors.clone()
    };
    if names.is_empty() {
        return Err(param("predictors", "table has no predictor columns"));
    }
    let xi: Vec<usize> = names.iter().map(|p| index(p)).collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyData(format!("{} has no data rows", src.path.display())));
    }
    let n = rows.len();
    let p = xi.len();
    let cell = |row: usize, rec: &[String], col: usize| -> Result<f64> {
        let name = &header[col];
        let raw = rec.get(col + offset).ok_or_else(|| Error::Parse {
            row: row + 2,
            column: name.clone(),
            reason: "missing value".into(),
        })?;
        let v: f64 = raw.parse().map_err(|_| Error::Parse {
            row: row + 2,
            column: name.clone(),
            reason: format!("non-numeric value '{raw}'"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row: row + 2,
                column: name.clone(),
                reason: format!("non-finite value '{raw}'"),
            });
        }
        Ok(v)
    };
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for (r, rec) in rows.iter().enumerate() {
        y[r] = cell(r, rec, yi)?;
        for (c, &k) in xi.iter().enumerate() {
            x[(r, c)] = cell(r, rec, k)?;
        }
    }
    let (data, means) = Dataset::from_raw(&x, y, Some(names))?;
    Ok(LoadedTable {
        data,
        means,
        rows: n,
    })
}

/// Settings of the random-split study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResamplingConfig {
    pub methods: Vec<Method>,
    pub splits: usize,
    pub train_size: usize,
    pub seed: u64,
    pub protocol: ProtocolConfig,
    /// Attempts per split before giving up on degenerate training designs.
    pub max_attempts: usize,
}

impl ResamplingConfig {
    pub fn new(methods: Vec<Method>, seed: u64) -> Self {
        Self {
            methods,
            splits: 100,
            train_size: 67,
            seed,
            protocol: ProtocolConfig::default(),
            max_attempts: 20,
        }
    }
}

/// Outcome of one method on one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRecord {
    pub split: usize,
    pub attempt: usize,
    pub lambda: Option<f64>,
    pub lambda2: Option<f64>,
    /// Mean squared prediction error on the held-out rows.
    pub mse: f64,
    /// `mse` divided by the held-out sample variance of `y`.
    pub normalized_mse: f64,
    pub selected: Vec<bool>,
    pub selected_count: usize,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(MeanStd {
        mean,
        std,
        count: values.len(),
    })
}

/// Aggregates of one method over the successful splits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodStudy {
    pub method: Method,
    pub mse: Option<MeanStd>,
    pub normalized_mse: Option<MeanStd>,
    pub lambda: Option<MeanStd>,
    pub lambda2: Option<MeanStd>,
    pub selected_count: Option<MeanStd>,
    /// Number of splits selecting each predictor.
    pub selection_counts: Vec<usize>,
    pub records: Vec<SplitRecord>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResamplingReport {
    pub variables: Vec<String>,
    pub rows: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub splits: usize,
    pub seed: u64,
    pub protocol: ProtocolConfig,
    pub notes: Vec<String>,
    /// Splits redrawn because a training design had a constant column.
    pub retries: Vec<String>,
    pub methods: Vec<MethodStudy>,
}

impl ResamplingReport {
    pub fn method(&self, m: Method) -> Option<&MethodStudy> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// Row partition of split `split`, attempt `attempt`: `(train, test)`.
pub fn split_rows(n: usize, train_size: usize, seed: u64, split: usize, attempt: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = RngStream::new(seed, (1 << 63) | ((attempt as u64) << 32) | (split as u64 + 1));
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut train = perm[..train_size].to_vec();
    let mut test = perm[train_size..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn rows_of(data: &Dataset, idx: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    (
        data.x().select_rows(idx),
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| data.y()[i])),
    )
}

fn has_constant_column(x: &DMatrix<f64>) -> bool {
    x.column_iter().any(|c| c.max() == c.min())
}

type SplitOutcome = (Vec<String>, Vec<std::result::Result<SplitRecord, String>>);

fn run_split(data: &Dataset, cfg: &ResamplingConfig, split: usize) -> SplitOutcome {
    let mut retries = Vec::new();
    let n = data.n();
    for attempt in 0..cfg.max_attempts {
        let (train, test) = split_rows(n, cfg.train_size, cfg.seed, split, attempt);
        let (xtr, ytr) = rows_of(data, &train);
        if has_constant_column(&xtr) {
            retries.push(format!("split {split} attempt {attempt}: constant training column, redrawn"));
            continue;
        }
        let (xte, yte) = rows_of(data, &test);
        let Ok((train_data, means)) = Dataset::from_raw(&xtr, ytr, data.names().map(<[String]>::to_vec)) else {
            retries.push(format!("split {split} attempt {attempt}: invalid training data, redrawn"));
            continue;
        };
        let ym = yte.mean();
        let yvar = yte.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / yte.len() as f64;
        let records = cfg
            .methods
            .iter()
            .map(|&m| {
                let mut rng = tuning_stream(cfg.seed, split, m);
                let mf = fit_method(&train_data, m, &cfg.protocol, &mut rng).map_err(|e| e.to_string())?;
                let pred = predict(&mf.fit, &xte, &means).map_err(|e| e.to_string())?;
                let mse = (&yte - pred).norm_squared() / yte.len() as f64;
                let selected: Vec<bool> = mf
                    .fit
                    .beta
                    .iter()
                    .map(|b| b.abs() >= cfg.protocol.zero_threshold)
                    .collect();
                Ok(SplitRecord {
                    split,
                    attempt,
                    lambda: mf.lambda,
                    lambda2: mf.lambda2,
                    mse,
                    normalized_mse: mse / yvar,
                    selected_count: selected.iter().filter(|&&s| s).count(),
                    selected,
                })
            })
            .collect();
        return (retries, records);
    }
    let msg = format!("split {split}: no usable partition after {} attempts", cfg.max_attempts);
    (retries, vec![Err(msg); cfg.methods.len()])
}

/// Repeated random train/test splits: per split and method, tune on the
/// training rows as in the simulations, fit, and score on the held-out rows.
pub fn resampling_study(data: &Dataset, cfg: &ResamplingConfig) -> Result<ResamplingReport> {
    cfg.protocol.validate()?;
    let n = data.n();
    if cfg.train_size < 2 || cfg.train_size >= n {
        return Err(param(
            "train_size",
            format!("need 2 <= train_size < n = {n}, got {}", cfg.train_size),
        ));
    }
    if cfg.splits == 0 || cfg.methods.is_empty() || cfg.max_attempts == 0 {
        return Err(param("splits", "need at least one split, method and attempt"));
    }
    let outcomes: Vec<SplitOutcome> = (0..cfg.splits)
        .into_par_iter()
        .map(|s| run_split(data, cfg, s))
        .collect();
    let p = data.p();
    let retries = outcomes.iter().flat_map(|(r, _)| r.iter().cloned()).collect();
    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let mut records = Vec::new();
            let mut failures = Vec::new();
            for (s, (_, out)) in outcomes.iter().enumerate() {
                match &out[k] {
                    Ok(r) => records.push(r.clone()),
                    Err(e) => failures.push(format!("split {s}: {e}")),
                }
            }
            let col = |f: fn(&SplitRecord) -> Option<f64>| -> Vec<f64> {
                records.iter().filter_map(f).collect()
            };
            let mut selection_counts = vec![0; p];
            for r in &records {
                for (c, &sel) in r.selected.iter().enumerate() {
                    selection_counts[c] += sel as usize;
                }
            }
            MethodStudy {
                method: m,
                mse: mean_std(&col(|r| Some(r.mse))),
                normalized_mse: mean_std(&col(|r| Some(r.normalized_mse))),
                lambda: mean_std(&col(|r| r.lambda)),
                lambda2: mean_std(&col(|r| r.lambda2)),
                selected_count: mean_std(&col(|r| Some(r.selected_count as f64))),
                selection_counts,
                records,
                failures,
            }
        })
        .collect();
    let mut notes = provenance_notes();
    notes.push("held-out error reported as raw MSE and as MSE divided by the held-out variance of y".into());
    Ok(ResamplingReport {
        variables: data
            .names()
            .map(<[String]>::to_vec)
            .unwrap_or_else(|| (1..=p).map(|j| format!("x{j}")).collect()),
        rows: n,
        train_size: cfg.train_size,
        test_size: n - cfg.train_size,
        splits: cfg.splits,
        seed: cfg.seed,
        protocol: cfg.protocol.clone(),
        notes,
        retries,
        methods,
    })
}
