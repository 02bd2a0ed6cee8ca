//! Probabilistic day-ahead electricity price forecasting.
//!
//! The core model is a dense feedforward network trained on a rolling
//! four-year window of hourly market data and sampled at prediction time
//! with Monte-Carlo dropout to produce a full predictive distribution per
//! delivery hour. Two classical benchmarks — a per-hour LASSO-estimated
//! autoregression (LEAR) and a per-hour GARCH(1,1) with exogenous
//! regressors (GARCHX) — consume the same features and emit the same
//! forecast records, so all three score identically under the shared
//! point and interval metrics.
//!
//! Modules, in pipeline order:
//!
//! - [`ingest`]: hourly CSV parsing, missing-value repair, day tables
//! - [`features`]: the 248-entry regressor and rolling-window splits
//! - [`network`]: the MLP with last-layer dropout and exact gradients
//! - [`train`]: Adam, early stopping, hyperparameter grid search
//! - [`inference`]: MC-dropout sampling, predictive summaries, quantiles
//! - [`metrics`]: pinball, CRPS, PICP, MPIW, MAE/RMSE/MAPE/sMAPE
//! - [`baselines`]: LEAR and GARCHX
//! - [`harness`]: synthetic data, rolling backtests, report files
//!
//! See the crate examples for runnable walkthroughs of each capability and
//! the `dayahead` binary for the command-line pipeline.

pub mod baselines;
pub mod features;
pub mod harness;
pub mod inference;
pub mod ingest;
mod linalg;
pub mod metrics;
pub mod model_io;
pub mod network;
pub mod seed;
pub mod train;

pub use linalg::Mat;
