//! Feature assembly for one target day.
//!
//! Each target day t maps to a 248-entry regressor laid out as
//! `[t, P(t−1), P(t−2), P(t−3), P(t−7), L(t), L(t−1), L(t−7), R(t), R(t−1),
//! R(t−7), weekday]`, where each lag block is the 24 hourly values of that
//! day and the weekday block is a Monday-first one-hot of size 7
//! (1 + 4·24 + 3·24 + 3·24 + 7 = 248).
//!
//! `make_window` turns a trailing data window into chronologically split
//! train/validation pairs; `Standardizer` z-scores features and targets on
//! training data only. The day-index entry and the one-hot block pass
//! through unscaled.

use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{DayTable, HOURS};

pub const FEATURE_DIM: usize = 248;
pub const PRICE_LAGS: [i64; 4] = [1, 2, 3, 7];
pub const EXOG_LAGS: [i64; 3] = [0, 1, 7];

const DAY_INDEX_SLOT: usize = 0;
const PRICE_BLOCK: usize = 1;
const LOAD_BLOCK: usize = PRICE_BLOCK + 4 * HOURS; // 97
const TRP_BLOCK: usize = LOAD_BLOCK + 3 * HOURS; // 169
const WEEKDAY_BLOCK: usize = TRP_BLOCK + 3 * HOURS; // 241

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("target {target} needs lag day {missing} which the table does not cover")]
    InsufficientHistory { target: NaiveDate, missing: NaiveDate },
    #[error("window of {needed} days before {target} not covered by table ({have} days available)")]
    WindowTooShort {
        target: NaiveDate,
        needed: i64,
        have: i64,
    },
    #[error("expected vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("standardizer needs at least 2 training pairs, got {0}")]
    NotEnoughTrainingData(usize),
}

/// The regressor for one target day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Ordinal of the target day relative to the window origin (0-based).
    pub day_index: i64,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn price_lag(&self, lag: i64) -> &[f64] {
        let slot = PRICE_LAGS.iter().position(|&l| l == lag).expect("price lag in {1,2,3,7}");
        &self.values[PRICE_BLOCK + slot * HOURS..PRICE_BLOCK + (slot + 1) * HOURS]
    }

    pub fn load_lag(&self, lag: i64) -> &[f64] {
        let slot = EXOG_LAGS.iter().position(|&l| l == lag).expect("load lag in {0,1,7}");
        &self.values[LOAD_BLOCK + slot * HOURS..LOAD_BLOCK + (slot + 1) * HOURS]
    }

    pub fn trp_lag(&self, lag: i64) -> &[f64] {
        let slot = EXOG_LAGS.iter().position(|&l| l == lag).expect("trp lag in {0,1,7}");
        &self.values[TRP_BLOCK + slot * HOURS..TRP_BLOCK + (slot + 1) * HOURS]
    }

    pub fn weekday_onehot(&self) -> &[f64] {
        &self.values[WEEKDAY_BLOCK..WEEKDAY_BLOCK + 7]
    }
}

/// Regressor plus the 24 hourly target prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedPair {
    pub date: NaiveDate,
    pub x: FeatureVector,
    pub y: [f64; HOURS],
}

/// Same-day exogenous inputs (the day-ahead load and renewable forecasts),
/// available before the target day's prices are.
#[derive(Debug, Clone)]
pub struct DayExog {
    pub load: [f64; HOURS],
    pub trp: [f64; HOURS],
}

/// Column names for the debug feature-matrix dump, in vector order.
pub fn feature_labels() -> Vec<String> {
    let mut labels = Vec::with_capacity(FEATURE_DIM);
    labels.push("day_index".to_string());
    for lag in PRICE_LAGS {
        for h in 0..HOURS {
            labels.push(format!("price_lag{lag}_h{h:02}"));
        }
    }
    for lag in EXOG_LAGS {
        for h in 0..HOURS {
            labels.push(format!("load_lag{lag}_h{h:02}"));
        }
    }
    for lag in EXOG_LAGS {
        for h in 0..HOURS {
            labels.push(format!("trp_lag{lag}_h{h:02}"));
        }
    }
    for day in ["mon", "tue", "wed", "thu", "fri", "sat", "sun"] {
        labels.push(format!("weekday_{day}"));
    }
    debug_assert_eq!(labels.len(), FEATURE_DIM);
    labels
}

/// Debug dump of assembled vectors with the fixed 248-column header.
pub fn write_feature_matrix_csv<W: Write>(pairs: &[SupervisedPair], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", feature_labels().join(";"))?;
    for pair in pairs {
        let row: Vec<String> = pair.x.values.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", row.join(";"))?;
    }
    Ok(())
}

/// Build the regressor for `target` given its exogenous day-ahead inputs.
/// `origin` is the window start; the day-index entry is `target − origin`.
pub fn forecast_features(
    table: &DayTable,
    exog: &DayExog,
    target: NaiveDate,
    origin: NaiveDate,
) -> Result<FeatureVector, FeatureError> {
    let lag_day = |lag: i64| {
        let d = target - Duration::days(lag);
        table
            .get(d)
            .ok_or(FeatureError::InsufficientHistory { target, missing: d })
    };

    let mut values = Vec::with_capacity(FEATURE_DIM);
    values.push((target - origin).num_days() as f64);
    for lag in PRICE_LAGS {
        values.extend_from_slice(&lag_day(lag)?.price);
    }
    for lag in EXOG_LAGS {
        if lag == 0 {
            values.extend_from_slice(&exog.load);
        } else {
            values.extend_from_slice(&lag_day(lag)?.load);
        }
    }
    for lag in EXOG_LAGS {
        if lag == 0 {
            values.extend_from_slice(&exog.trp);
        } else {
            values.extend_from_slice(&lag_day(lag)?.trp);
        }
    }
    let mut onehot = [0.0; 7];
    onehot[target.weekday().num_days_from_monday() as usize] = 1.0;
    values.extend_from_slice(&onehot);
    debug_assert_eq!(values.len(), FEATURE_DIM);

    Ok(FeatureVector {
        day_index: (target - origin).num_days(),
        values,
    })
}

/// Assemble the supervised pair for `target`, reading its exogenous inputs
/// and target prices from the table itself. Day indices count from `origin`.
pub fn assemble_features_from(
    table: &DayTable,
    target: NaiveDate,
    origin: NaiveDate,
) -> Result<SupervisedPair, FeatureError> {
    let day = table
        .get(target)
        .ok_or(FeatureError::InsufficientHistory { target, missing: target })?;
    let exog = DayExog {
        load: day.load,
        trp: day.trp,
    };
    let x = forecast_features(table, &exog, target, origin)?;
    Ok(SupervisedPair {
        date: target,
        x,
        y: day.price,
    })
}

/// Assemble with the table's own first day as the index origin.
pub fn assemble_features(table: &DayTable, target: NaiveDate) -> Result<SupervisedPair, FeatureError> {
    assemble_features_from(table, target, table.start_date())
}

/// Chronologically split pairs of one rolling window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowSplit {
    pub train: Vec<SupervisedPair>,
    pub validation: Vec<SupervisedPair>,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
}

impl WindowSplit {
    pub fn all_pairs(&self) -> impl Iterator<Item = &SupervisedPair> {
        self.train.iter().chain(self.validation.iter())
    }
}

/// Split eligible pairs 80/20 with the validation block last. The training
/// side takes `floor(0.8 n)` so a 4-year window (1453 eligible days at 365
/// days per year) yields the expected 1162 training pairs.
pub fn chronological_split(
    pairs: Vec<SupervisedPair>,
    window_start: NaiveDate,
    window_end: NaiveDate,
) -> WindowSplit {
    let n_train = (0.8 * pairs.len() as f64).floor() as usize;
    let mut train = pairs;
    let validation = train.split_off(n_train);
    WindowSplit {
        train,
        validation,
        window_start,
        window_end,
    }
}

/// Build the training window for `target` from the `window_days` directly
/// preceding it. The first 7 days seed the lags; the rest become pairs.
pub fn make_window_days(
    table: &DayTable,
    target: NaiveDate,
    window_days: i64,
) -> Result<WindowSplit, FeatureError> {
    let window_start = target - Duration::days(window_days);
    let window_end = target - Duration::days(1);
    if !table.contains(window_start) || !table.contains(window_end) || window_days < 8 {
        let have = if table.contains(window_end) {
            (window_end - table.start_date()).num_days() + 1
        } else {
            0
        };
        return Err(FeatureError::WindowTooShort {
            target,
            needed: window_days,
            have,
        });
    }

    let first_eligible = window_start + Duration::days(7);
    let n_days = (window_end - first_eligible).num_days() + 1;
    let mut pairs = Vec::with_capacity(n_days as usize);
    for i in 0..n_days {
        let date = first_eligible + Duration::days(i);
        pairs.push(assemble_features_from(table, date, window_start)?);
    }
    Ok(chronological_split(pairs, window_start, window_end))
}

/// `make_window_days` with the conventional 365-day year.
pub fn make_window(
    table: &DayTable,
    target: NaiveDate,
    window_years: u32,
) -> Result<WindowSplit, FeatureError> {
    make_window_days(table, target, 365 * window_years as i64)
}

/// Per-feature and per-target z-score parameters fitted on training pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_std: Vec<f64>,
}

/// Indices exempt from scaling: the day-index entry and the one-hot block.
fn passthrough(idx: usize) -> bool {
    idx == DAY_INDEX_SLOT || idx >= WEEKDAY_BLOCK
}

const STD_FLOOR: f64 = 1e-9;

/// Fit feature and target moments on training pairs only (population
/// convention, divisor n). Constant columns get their std floored to 1 so
/// they map to exactly 0.
pub fn fit_standardizer(train: &[SupervisedPair]) -> Result<Standardizer, FeatureError> {
    if train.len() < 2 {
        return Err(FeatureError::NotEnoughTrainingData(train.len()));
    }
    let n = train.len() as f64;
    let dim = train[0].x.values.len();

    let mut x_mean = vec![0.0; dim];
    let mut y_mean = vec![0.0; HOURS];
    for pair in train {
        for (m, v) in x_mean.iter_mut().zip(&pair.x.values) {
            *m += v;
        }
        for (m, v) in y_mean.iter_mut().zip(&pair.y) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    y_mean.iter_mut().for_each(|m| *m /= n);

    let mut x_std = vec![0.0; dim];
    let mut y_std = vec![0.0; HOURS];
    for pair in train {
        for ((s, v), m) in x_std.iter_mut().zip(&pair.x.values).zip(&x_mean) {
            *s += (v - m) * (v - m);
        }
        for ((s, v), m) in y_std.iter_mut().zip(&pair.y).zip(&y_mean) {
            *s += (v - m) * (v - m);
        }
    }
    let finish = |s: &mut f64| {
        *s = (*s / n).sqrt();
        if *s < STD_FLOOR {
            *s = 1.0;
        }
    };
    x_std.iter_mut().for_each(finish);
    y_std.iter_mut().for_each(finish);

    for idx in 0..dim {
        if passthrough(idx) {
            x_mean[idx] = 0.0;
            x_std[idx] = 1.0;
        }
    }
    Ok(Standardizer {
        x_mean,
        x_std,
        y_mean,
        y_std,
    })
}

impl Standardizer {
    fn check(&self, got: usize, expected: usize) -> Result<(), FeatureError> {
        if got != expected {
            return Err(FeatureError::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    pub fn apply_x(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(x.len(), self.x_mean.len())?;
        Ok(x.iter()
            .zip(&self.x_mean)
            .zip(&self.x_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn invert_x(&self, z: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(z.len(), self.x_mean.len())?;
        Ok(z.iter()
            .zip(&self.x_mean)
            .zip(&self.x_std)
            .map(|((v, m), s)| v * s + m)
            .collect())
    }

    pub fn apply_y(&self, y: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(y.len(), self.y_mean.len())?;
        Ok(y.iter()
            .zip(&self.y_mean)
            .zip(&self.y_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn invert_y(&self, z: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check(z.len(), self.y_mean.len())?;
        Ok(z.iter()
            .zip(&self.y_mean)
            .zip(&self.y_std)
            .map(|((v, m), s)| v * s + m)
            .collect())
    }
}
