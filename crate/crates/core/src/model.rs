//! Model specifications and fit results.

use nalgebra::DVector;

use crate::error::{param, Result};

/// Default Huber transition point.
pub const DEFAULT_HUBER_M: f64 = 1.345;
/// Default BerHu transition point (same as the Huber one).
pub const DEFAULT_BERHU_L: f64 = 1.345;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    LeastSquares,
    /// Huber criterion with concomitant scale and threshold `m`.
    Huber { m: f64 },
}

impl Loss {
    pub fn is_huber(&self) -> bool {
        matches!(self, Loss::Huber { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    None,
    Ridge {
        lambda: f64,
    },
    AdaptiveLasso {
        lambda: f64,
        weights: DVector<f64>,
    },
    /// `lambda1 * sum w_j |b_j| + lambda2 * sum b_j^2`; weights act on the l1 part only.
    AdaptiveElasticNet {
        lambda1: f64,
        lambda2: f64,
        weights: DVector<f64>,
    },
    /// Adaptive BerHu with concomitant scale `tau`.
    AdaptiveBerHu {
        lambda: f64,
        l: f64,
        weights: DVector<f64>,
    },
}

impl Penalty {
    pub fn weights(&self) -> Option<&DVector<f64>> {
        match self {
            Penalty::AdaptiveLasso { weights, .. }
            | Penalty::AdaptiveElasticNet { weights, .. }
            | Penalty::AdaptiveBerHu { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// The primary regularization constant (`lambda1` for the elastic net).
    pub fn lambda(&self) -> f64 {
        match *self {
            Penalty::None => 0.0,
            Penalty::Ridge { lambda }
            | Penalty::AdaptiveLasso { lambda, .. }
            | Penalty::AdaptiveBerHu { lambda, .. } => lambda,
            Penalty::AdaptiveElasticNet { lambda1, .. } => lambda1,
        }
    }

    /// Copy of this penalty with the primary constant replaced.
    pub fn with_lambda(&self, value: f64) -> Penalty {
        let mut out = self.clone();
        match &mut out {
            Penalty::None => {}
            Penalty::Ridge { lambda }
            | Penalty::AdaptiveLasso { lambda, .. }
            | Penalty::AdaptiveBerHu { lambda, .. } => *lambda = value,
            Penalty::AdaptiveElasticNet { lambda1, .. } => *lambda1 = value,
        }
        out
    }

    pub fn is_berhu(&self) -> bool {
        matches!(self, Penalty::AdaptiveBerHu { .. })
    }

    /// Whether the penalty is nonsmooth at zero (i.e. performs selection).
    pub fn selects(&self) -> bool {
        matches!(
            self,
            Penalty::AdaptiveLasso { .. }
                | Penalty::AdaptiveElasticNet { .. }
                | Penalty::AdaptiveBerHu { .. }
        )
    }

    /// `lambda * w_j` for the l1-like part of coordinate `j` (0 for smooth penalties).
    pub(crate) fn l1_level(&self, j: usize) -> f64 {
        match self {
            Penalty::AdaptiveLasso { lambda, weights } => lambda * weights[j],
            Penalty::AdaptiveElasticNet {
                lambda1, weights, ..
            } => lambda1 * weights[j],
            Penalty::AdaptiveBerHu { lambda, weights, .. } => lambda * weights[j],
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub loss: Loss,
    pub penalty: Penalty,
}

impl ModelSpec {
    pub fn new(loss: Loss, penalty: Penalty) -> Self {
        Self { loss, penalty }
    }

    /// Checks signs, finiteness and weight length against `p` predictors.
    pub fn validate(&self, p: usize) -> Result<()> {
        if let Loss::Huber { m } = self.loss {
            if !(m.is_finite() && m > 0.0) {
                return Err(param("M", format!("must be positive and finite, got {m}")));
            }
        }
        let nonneg = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(param(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        match &self.penalty {
            Penalty::None => {}
            Penalty::Ridge { lambda } => nonneg("lambda", *lambda)?,
            Penalty::AdaptiveLasso { lambda, .. } => nonneg("lambda", *lambda)?,
            Penalty::AdaptiveElasticNet {
                lambda1, lambda2, ..
            } => {
                nonneg("lambda1", *lambda1)?;
                nonneg("lambda2", *lambda2)?;
            }
            Penalty::AdaptiveBerHu { lambda, l, .. } => {
                nonneg("lambda", *lambda)?;
                if !(l.is_finite() && *l > 0.0) {
                    return Err(param("L", format!("must be positive and finite, got {l}")));
                }
            }
        }
        if let Some(w) = self.penalty.weights() {
            if w.len() != p {
                return Err(param(
                    "weights",
                    format!("expected {p} entries, found {}", w.len()),
                ));
            }
            if let Some(bad) = w.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(param("weights", format!("entries must be in (0, inf), got {bad}")));
            }
        }
        Ok(())
    }
}

/// A fitted point `(alpha, beta, s, tau)` with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub alpha: f64,
    pub beta: DVector<f64>,
    /// Concomitant loss scale; present iff the loss is Huber.
    pub s: Option<f64>,
    /// Concomitant penalty scale; present iff the penalty is BerHu.
    pub tau: Option<f64>,
    pub objective: f64,
    pub sweeps: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Set by the closed-form least-squares route when `X` is rank deficient
    /// (the minimum-norm solution is returned).
    pub rank_deficient: bool,
}

impl FitResult {
    /// A bare point with no diagnostics, mostly useful for prediction.
    pub fn point(alpha: f64, beta: DVector<f64>) -> Self {
        Self {
            alpha,
            beta,
            s: None,
            tau: None,
            objective: f64::NAN,
            sweeps: 0,
            kkt_residual: f64::NAN,
            converged: false,
            rank_deficient: false,
        }
    }

    /// Number of coefficients with `|b_j| >= zero_threshold`.
    pub fn support_size(&self, zero_threshold: f64) -> usize {
        self.beta.iter().filter(|b| b.abs() >= zero_threshold).count()
    }
}
