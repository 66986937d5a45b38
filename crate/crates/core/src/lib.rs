//! Covariate-aware probabilistic time-series forecasting.
//!
//! The crate bundles everything needed to train and evaluate a patched
//! encoder-decoder quantile forecaster that reads covariates in context:
//!
//! - [`dataio`] and [`config`]: JSON-lines corpus/forecast files and the flat
//!   `key = value` configuration format.
//! - [`synthgen`]: synthetic covariate signals (step or bell events plus a
//!   piecewise-linear changepoint trend).
//! - [`augment`]: informative covariate augmentation, which attaches sampled
//!   covariates to a target and adds sampled sparse linear impacts so the
//!   covariates carry predictive value.
//! - [`preprocess`]: instance normalization and patching.
//! - [`model`]: the forecaster itself, a small reverse-mode autodiff engine,
//!   the AdamW trainer and a finite-difference gradient checker.
//! - [`baselines`]: seasonal naive and the ridge in-context covariate model.
//! - [`evaluation`]: MASE, WQL, rolling-origin tasks and relative-score
//!   aggregation.
//! - [`experiments`]: the desk-scale augmentation ablation and the impact
//!   sensitivity study.

pub mod augment;
pub mod baselines;
pub mod config;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod series;
pub mod synthgen;

pub use error::{Error, Result};

/// The nine equidistant quantile levels every forecast is expressed at.
pub const QUANTILE_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// One row of nine quantile values per forecast step, original scale.
pub type QuantileForecast = Vec<[f64; 9]>;

/// Index of the median within [`QUANTILE_LEVELS`].
pub const MEDIAN_INDEX: usize = 4;
