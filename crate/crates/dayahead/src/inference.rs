//! Monte-Carlo-dropout predictive sampling for one target day.
//!
//! `mc_sample` runs M stochastic forward passes with independent masks and
//! de-standardizes the outputs to EUR/MWh. `summarize` reduces the sample
//! matrix to the predictive mean, the population standard deviation
//! (divisor M), and per-hour prediction intervals — empirical quantiles by
//! default, with a Gaussian μ ± zσ variant behind a switch. Quantiles use
//! linear interpolation between order statistics (the "type 7" rule) so
//! fixtures are reproducible bit-for-bit across ports.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::features::{FeatureError, FeatureVector, Standardizer};
use crate::ingest::HOURS;
use crate::linalg::quantile_sorted;
use crate::network::{forward_into, ForwardCache, MlpConfig, MlpParams, NetworkError};
use crate::seed::rng_for;

/// Paper default for the MC sample count.
pub const DEFAULT_MC_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("need at least 2 MC samples, got {0}")]
    BadSampleCount(usize),
    #[error("coverage {0} outside (0, 1)")]
    BadCoverage(f64),
    #[error("non-finite prediction in sample {index}")]
    NonFiniteSample { index: usize },
    #[error("quantile grid must be strictly ascending within (0, 1)")]
    BadQuantileGrid,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// M de-standardized forward passes, one row per mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    pub samples: Vec<[f64; HOURS]>,
}

impl PredictiveSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn hour_column(&self, h: usize) -> Vec<f64> {
        self.samples.iter().map(|row| row[h]).collect()
    }
}

/// How the prediction interval is built from the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMethod {
    /// Empirical per-hour quantiles of the MC samples.
    #[default]
    Quantile,
    /// μ ± z·σ with the Gaussian quantile for the requested coverage.
    Gaussian,
}

/// Per-hour predictive mean, spread, and interval bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub mean: [f64; HOURS],
    pub std: [f64; HOURS],
    pub lower: [f64; HOURS],
    pub upper: [f64; HOURS],
    pub coverage: f64,
}

/// Run M independent-mask forward passes and de-standardize the outputs.
/// Masks are seeded per sample index, so the matrix is reproducible and
/// index-order independent.
pub fn mc_sample(
    config: &MlpConfig,
    params: &MlpParams,
    standardizer: &Standardizer,
    x: &FeatureVector,
    m: usize,
    seed: u64,
) -> Result<PredictiveSamples, InferenceError> {
    if m < 2 {
        return Err(InferenceError::BadSampleCount(m));
    }
    let z = standardizer.apply_x(&x.values)?;
    let mut cache = ForwardCache::default();
    let mut samples = Vec::with_capacity(m);
    for k in 0..m {
        let mask = crate::network::DropoutMask::sample(
            config.hidden_dim,
            config.dropout_rate,
            &mut rng_for(seed, "mc", k as u64),
        )?;
        forward_into(params, &z, Some(&mask), &mut cache)?;
        let raw = standardizer.invert_y(&cache.output)?;
        let mut row = [0.0; HOURS];
        for (slot, v) in row.iter_mut().zip(&raw) {
            if !v.is_finite() {
                return Err(InferenceError::NonFiniteSample { index: k });
            }
            *slot = *v;
        }
        samples.push(row);
    }
    Ok(PredictiveSamples { samples })
}

/// Deterministic (all-ones mask) pass in EUR/MWh.
pub fn deterministic_forecast(
    params: &MlpParams,
    standardizer: &Standardizer,
    x: &FeatureVector,
) -> Result<[f64; HOURS], InferenceError> {
    let z = standardizer.apply_x(&x.values)?;
    let mut cache = ForwardCache::default();
    forward_into(params, &z, None, &mut cache)?;
    let raw = standardizer.invert_y(&cache.output)?;
    let mut out = [0.0; HOURS];
    out.copy_from_slice(&raw);
    Ok(out)
}

/// Gaussian quantile for two-sided coverage, e.g. 0.9 → 1.6449.
pub fn gaussian_z(coverage: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(0.5 + coverage / 2.0)
}

/// Reduce samples to mean, population std (divisor M), and interval bounds.
pub fn summarize(
    samples: &PredictiveSamples,
    coverage: f64,
    method: IntervalMethod,
) -> Result<PredictiveSummary, InferenceError> {
    if samples.len() < 2 {
        return Err(InferenceError::BadSampleCount(samples.len()));
    }
    if !(0.0 < coverage && coverage < 1.0) {
        return Err(InferenceError::BadCoverage(coverage));
    }
    let m = samples.len() as f64;
    let mut mean = [0.0; HOURS];
    let mut std = [0.0; HOURS];
    let mut lower = [0.0; HOURS];
    let mut upper = [0.0; HOURS];

    for h in 0..HOURS {
        let mut col = samples.hour_column(h);
        let mu = col.iter().sum::<f64>() / m;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m;
        mean[h] = mu;
        std[h] = var.sqrt();
        match method {
            IntervalMethod::Quantile => {
                col.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
                let tail = (1.0 - coverage) / 2.0;
                lower[h] = quantile_sorted(&col, tail);
                upper[h] = quantile_sorted(&col, 1.0 - tail);
            }
            IntervalMethod::Gaussian => {
                let z = gaussian_z(coverage);
                lower[h] = mu - z * std[h];
                upper[h] = mu + z * std[h];
            }
        }
    }
    Ok(PredictiveSummary {
        mean,
        std,
        lower,
        upper,
        coverage,
    })
}

/// Empirical per-hour quantiles on an ascending grid; the output is
/// monotone non-decreasing along the grid by construction.
pub fn quantile_curve(
    samples: &PredictiveSamples,
    grid: &[f64],
) -> Result<Vec<[f64; HOURS]>, InferenceError> {
    if samples.is_empty() {
        return Err(InferenceError::BadSampleCount(0));
    }
    if grid.is_empty()
        || grid.windows(2).any(|w| w[0] >= w[1])
        || grid.iter().any(|q| !(0.0 < *q && *q < 1.0))
    {
        return Err(InferenceError::BadQuantileGrid);
    }
    let mut columns: Vec<Vec<f64>> = (0..HOURS).map(|h| samples.hour_column(h)).collect();
    for col in &mut columns {
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    }
    let mut curve = Vec::with_capacity(grid.len());
    for &q in grid {
        let mut row = [0.0; HOURS];
        for (h, col) in columns.iter().enumerate() {
            row[h] = quantile_sorted(col, q);
        }
        curve.push(row);
    }
    Ok(curve)
}

/// The default percentile grid {0.01, 0.02, …, 0.99}.
pub fn default_quantile_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}
