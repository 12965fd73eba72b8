//! Datasets, column centering, prediction and seeded random streams.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::model::FitResult;

/// A centered regression problem: `y = alpha + X beta + noise`, with every
/// column of `X` summing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from an already centered design.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, names: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::EmptyData(format!("design is {n}x{p}")));
        }
        if y.len() != n {
            return Err(Error::Shape {
                expected: format!("response of length {n}"),
                found: format!("length {}", y.len()),
            });
        }
        if let Some(names) = &names {
            if names.len() != p {
                return Err(Error::Shape {
                    expected: format!("{p} variable names"),
                    found: format!("{}", names.len()),
                });
            }
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        let scale = x.amax().max(1.0);
        for (j, col) in x.column_iter().enumerate() {
            let sum: f64 = col.sum();
            if sum.abs() > 1e-9 * n as f64 * scale {
                return Err(Error::InvalidData(format!(
                    "column {j} is not centered (sum {sum:e})"
                )));
            }
        }
        Ok(Self { x, y, names })
    }

    /// Centers `raw` and wraps it; returns the column means alongside.
    pub fn from_raw(
        raw: &DMatrix<f64>,
        y: DVector<f64>,
        names: Option<Vec<String>>,
    ) -> Result<(Self, DVector<f64>)> {
        let (x, means) = center_columns(raw)?;
        Ok((Self::new(x, y, names)?, means))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Same design, new response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y, self.names.clone())
    }

    /// Residuals `y - alpha - X beta`.
    pub fn residuals(&self, alpha: f64, beta: &DVector<f64>) -> DVector<f64> {
        let mut r = &self.y - &self.x * beta;
        r.add_scalar_mut(-alpha);
        r
    }
}

/// Removes the column means of `raw`. Returns the centered matrix and the means.
pub fn center_columns(raw: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (n, p) = raw.shape();
    if n == 0 {
        return Err(Error::InvalidData("matrix has no rows".into()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite entry".into()));
    }
    let mut out = raw.clone();
    let mut means = DVector::zeros(p);
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        means[j] = mean;
    }
    Ok((out, means))
}

/// `alpha + (x_new - means) beta` for each row of `x_new`.
pub fn predict(
    fit: &FitResult,
    x_new: &DMatrix<f64>,
    column_means: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p = fit.beta.len();
    if x_new.ncols() != p || column_means.len() != p {
        return Err(Error::Shape {
            expected: format!("{p} columns and {p} means"),
            found: format!("{} columns, {} means", x_new.ncols(), column_means.len()),
        });
    }
    let shift = column_means.dot(&fit.beta);
    let mut out = x_new * &fit.beta;
    out.add_scalar_mut(fit.alpha - shift);
    Ok(out)
}

/// Deterministic random stream keyed by `(seed, stream_id)`.
///
/// Each replication owns one stream; identical keys reproduce identical draws
/// on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open_unit(&mut self) -> f64 {
        loop {
            // 53 random mantissa bits
            let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
