//! Point and interval scoring rules.
//!
//! Interval quality: pinball loss, CRPS approximated by averaged pinball
//! loss over a percentile grid, prediction-interval coverage probability
//! (PICP, inclusive bounds), and mean prediction-interval width (MPIW).
//! Point quality: MAE, RMSE, MAPE (guarded against near-zero prices), and
//! sMAPE reported as a ratio with the factor-2 numerator.
//!
//! Aggregates use the double mean over days and hours, 1/(24·N); per-hour
//! breakdowns use 1/N per hour slot. Every metric is a pure fold over
//! records, so partition-then-combine parallelism is safe.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::HOURS;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no records to score")]
    Empty,
    #[error("day {date} has {found} hourly records, expected 24")]
    IncompleteDay { date: NaiveDate, found: usize },
    #[error("non-monotone quantile forecasts at {date} hour {hour}")]
    NonMonotoneQuantiles { date: NaiveDate, hour: u8 },
    #[error("record has {got} quantile values but the grid has {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error("quantile level {0} outside (0, 1)")]
    BadQuantile(f64),
    #[error("MAPE undefined: every observation below the {0} EUR/MWh floor")]
    AllBelowMapeFloor(f64),
}

/// One scored (day, hour) cell: observation, point forecast, interval, and
/// quantile forecasts on a fixed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub date: NaiveDate,
    pub hour: u8,
    pub observed: f64,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub quantiles: Vec<f64>,
}

/// Scoring configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsOptions {
    /// Quantile levels the records' `quantiles` vectors are aligned to.
    pub quantile_grid: Vec<f64>,
    /// Multiplier on the grid-averaged pinball loss; 2 matches the
    /// standard CRPS identity, 1 reports the bare average.
    pub crps_factor: f64,
    /// Observations with |price| below this are excluded from MAPE.
    pub mape_floor: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            quantile_grid: crate::inference::default_quantile_grid(),
            crps_factor: 2.0,
            mape_floor: 1.0,
        }
    }
}

/// Quantile loss at level `q`: penalizes an over-forecast by `q` and an
/// under-forecast by `1 − q`.
pub fn pinball(q: f64, forecast_q: f64, observed: f64) -> f64 {
    debug_assert!(0.0 < q && q < 1.0);
    if forecast_q >= observed {
        q * (forecast_q - observed)
    } else {
        (1.0 - q) * (observed - forecast_q)
    }
}

/// CRPS of a quantile-function forecast via the pinball-average identity.
///
/// The asymmetry weight is mirrored against the quantile level (`1 − q`
/// pairs with the q-th quantile) so the grid average times the factor 2
/// reproduces the closed-form CRPS of known distributions.
pub fn crps_from_quantiles(
    grid: &[f64],
    quantile_forecasts: &[f64],
    observed: f64,
    crps_factor: f64,
) -> Result<f64, MetricsError> {
    if grid.is_empty() {
        return Err(MetricsError::Empty);
    }
    if grid.len() != quantile_forecasts.len() {
        return Err(MetricsError::GridMismatch {
            expected: grid.len(),
            got: quantile_forecasts.len(),
        });
    }
    if let Some(&q) = grid.iter().find(|q| !(0.0 < **q && **q < 1.0)) {
        return Err(MetricsError::BadQuantile(q));
    }
    if quantile_forecasts.windows(2).any(|w| w[0] > w[1]) {
        return Err(MetricsError::NonMonotoneQuantiles {
            date: NaiveDate::MIN,
            hour: 0,
        });
    }
    let sum: f64 = grid
        .iter()
        .zip(quantile_forecasts)
        .map(|(&q, &f)| pinball(1.0 - q, f, observed))
        .sum();
    Ok(crps_factor * sum / grid.len() as f64)
}

/// Fraction of observations inside their interval, bounds inclusive.
pub fn picp(records: &[ForecastRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let covered = records
        .iter()
        .filter(|r| r.lower <= r.observed && r.observed <= r.upper)
        .count();
    Ok(covered as f64 / records.len() as f64)
}

/// Mean interval width.
pub fn mpiw(records: &[ForecastRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(records.iter().map(|r| r.upper - r.lower).sum::<f64>() / records.len() as f64)
}

/// MAE, RMSE, MAPE (percent), sMAPE (ratio), plus the MAPE exclusion count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub smape: f64,
    pub mape_excluded: usize,
}

pub fn point_metrics(records: &[ForecastRecord], mape_floor: f64) -> Result<PointMetrics, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut smape_sum = 0.0;
    let mut mape_sum = 0.0;
    let mut mape_n = 0usize;
    for r in records {
        let err = r.point - r.observed;
        abs_sum += err.abs();
        sq_sum += err * err;
        let denom = r.point.abs() + r.observed.abs();
        if denom > 0.0 {
            smape_sum += 2.0 * err.abs() / denom;
        }
        if r.observed.abs() >= mape_floor {
            mape_sum += err.abs() / r.observed.abs();
            mape_n += 1;
        }
    }
    if mape_n == 0 {
        return Err(MetricsError::AllBelowMapeFloor(mape_floor));
    }
    Ok(PointMetrics {
        mae: abs_sum / n,
        rmse: (sq_sum / n).sqrt(),
        mape: 100.0 * mape_sum / mape_n as f64,
        smape: smape_sum / n,
        mape_excluded: records.len() - mape_n,
    })
}

/// Per-hour-of-day slice of the aggregate metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourBreakdown {
    pub hour: u8,
    pub mae: f64,
    pub rmse: f64,
    pub crps: f64,
    pub picp: f64,
    pub mpiw: f64,
}

/// Full per-model evaluation over a test period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub n_days: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub smape: f64,
    pub mape_excluded: usize,
    pub crps: f64,
    pub picp: f64,
    pub mpiw: f64,
    /// Mean pinball loss per quantile level, in grid order.
    pub pinball_by_q: Vec<(f64, f64)>,
    pub per_hour: Vec<HourBreakdown>,
}

fn mean_crps(records: &[ForecastRecord], options: &MetricsOptions) -> Result<f64, MetricsError> {
    let mut total = 0.0;
    for r in records {
        grid_check(r, options)?;
        total += crps_from_quantiles(&options.quantile_grid, &r.quantiles, r.observed, options.crps_factor)
            .map_err(|e| match e {
                MetricsError::NonMonotoneQuantiles { .. } => MetricsError::NonMonotoneQuantiles {
                    date: r.date,
                    hour: r.hour,
                },
                other => other,
            })?;
    }
    Ok(total / records.len() as f64)
}

fn grid_check(r: &ForecastRecord, options: &MetricsOptions) -> Result<(), MetricsError> {
    if r.quantiles.len() != options.quantile_grid.len() {
        return Err(MetricsError::GridMismatch {
            expected: options.quantile_grid.len(),
            got: r.quantiles.len(),
        });
    }
    Ok(())
}

/// Aggregate every metric over a complete test period. Each calendar day
/// must contribute exactly 24 hourly records.
pub fn aggregate_report(
    records: &[ForecastRecord],
    model: &str,
    options: &MetricsOptions,
) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut hours_per_day: BTreeMap<NaiveDate, Vec<bool>> = BTreeMap::new();
    for r in records {
        let slots = hours_per_day.entry(r.date).or_insert_with(|| vec![false; HOURS]);
        slots[r.hour as usize] = true;
    }
    for (date, slots) in &hours_per_day {
        let found = slots.iter().filter(|&&b| b).count();
        if found != HOURS {
            return Err(MetricsError::IncompleteDay { date: *date, found });
        }
    }

    let point = point_metrics(records, options.mape_floor)?;
    let crps = mean_crps(records, options)?;
    let picp_all = picp(records)?;
    let mpiw_all = mpiw(records)?;

    let pinball_by_q: Vec<(f64, f64)> = options
        .quantile_grid
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let mean = records
                .iter()
                .map(|r| pinball(q, r.quantiles[i], r.observed))
                .sum::<f64>()
                / records.len() as f64;
            (q, mean)
        })
        .collect();

    let mut per_hour = Vec::with_capacity(HOURS);
    for h in 0..HOURS as u8 {
        let slice: Vec<ForecastRecord> = records.iter().filter(|r| r.hour == h).cloned().collect();
        let p = point_metrics(&slice, options.mape_floor)?;
        per_hour.push(HourBreakdown {
            hour: h,
            mae: p.mae,
            rmse: p.rmse,
            crps: mean_crps(&slice, options)?,
            picp: picp(&slice)?,
            mpiw: mpiw(&slice)?,
        });
    }

    Ok(MetricsReport {
        model: model.to_string(),
        n_days: hours_per_day.len(),
        mae: point.mae,
        rmse: point.rmse,
        mape: point.mape,
        smape: point.smape,
        mape_excluded: point.mape_excluded,
        crps,
        picp: picp_all,
        mpiw: mpiw_all,
        pinball_by_q,
        per_hour,
    })
}
