//! Robust penalized regression with the adaptive BerHu penalty.
//!
//! The main estimator minimizes, jointly over `(alpha, beta, s, tau)`,
//!
//! ```text
//! L_H(alpha, beta, s) + lambda * P(beta, tau)
//! ```
//!
//! where `L_H` is Huber's criterion with concomitant scale `s` (or the residual
//! sum of squares) and `P` the adaptive BerHu penalty with concomitant scale
//! `tau`. Adaptive lasso, ridge and adaptive elastic-net penalties are provided
//! for comparison, along with BIC / cross-validation tuning, KKT and
//! grouping-effect diagnostics, and the block-correlated simulation study.

pub mod checks;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod loss;
pub mod model;
pub mod penalty;
pub mod simulation;
pub mod solver;
pub mod tuning;

pub use data::{center_columns, predict, Dataset, RngStream};
pub use error::{Error, Result};
pub use diagnostics::{
    grouping_bound, grouping_bound_all, rpe, selection_metrics, GroupingBoundReport, GroupingSummary,
    SelectionMetrics,
};
pub use ingest::{load_table, resampling_study, ResamplingConfig, ResamplingReport, TabularSource};
pub use model::{FitResult, Loss, ModelSpec, Penalty, DEFAULT_BERHU_L, DEFAULT_HUBER_M};
pub use solver::{
    fit, fit_path, fit_unpenalized, fit_with_trace, kkt_check, objective, KktReport, SolverConfig,
};
pub use simulation::{
    run_experiment, BlockModelSpec, ExperimentConfig, ExperimentReport, Method, ProtocolConfig,
};
