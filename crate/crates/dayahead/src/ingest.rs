//! Hourly market CSV ingestion.
//!
//! Raw exports arrive as one row per hour with price, residual load, and
//! total renewable production (TRP) columns. This module parses them,
//! repairs missing values, and assembles a gapless calendar-day table:
//!
//! 1. group rows by calendar day (24 hourly slots each);
//! 2. hour-level imputation: an isolated missing hour becomes the mean of
//!    its temporal neighbors, treating the data as one continuous hourly
//!    signal (hour 0 borrows hour 23 of the previous day);
//! 3. day-level imputation: a fully missing day becomes the elementwise
//!    mean of the two complete adjacent days;
//! 4. a final hour-level pass repairs holes that became fillable once a
//!    neighboring day was reconstructed.
//!
//! Anything still missing after step 4 is an unrecoverable gap and the
//! build fails with the offending date range.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOURS: usize = 24;

/// The three value channels carried by each hourly row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Price,
    Load,
    Trp,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Price, Channel::Load, Channel::Trp];
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Price => write!(f, "price"),
            Channel::Load => write!(f, "residual_load"),
            Channel::Trp => write!(f, "trp"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("csv schema error: {0}")]
    Schema(String),
    #[error("line {line}: unparseable timestamp {value:?}")]
    Timestamp { line: usize, value: String },
    #[error("duplicate record for {date} hour {hour}")]
    Duplicate { date: NaiveDate, hour: u8 },
    #[error("unrecoverable {channel} gap between {start} and {end}")]
    UnrecoverableGap {
        channel: Channel,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("no records to build a day table from")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One parsed row. Every value is independently optional; a cell that fails
/// to parse as a finite number is treated as missing rather than an error.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyRecord {
    pub date: NaiveDate,
    pub hour: u8,
    pub price: Option<f64>,
    pub residual_load: Option<f64>,
    pub trp: Option<f64>,
}

impl HourlyRecord {
    fn get(&self, ch: Channel) -> Option<f64> {
        match ch {
            Channel::Price => self.price,
            Channel::Load => self.residual_load,
            Channel::Trp => self.trp,
        }
    }
}

/// Per-channel flags marking which hours were filled rather than read.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputedMask {
    pub price: [bool; HOURS],
    pub load: [bool; HOURS],
    pub trp: [bool; HOURS],
}

impl ImputedMask {
    pub fn channel(&self, ch: Channel) -> &[bool; HOURS] {
        match ch {
            Channel::Price => &self.price,
            Channel::Load => &self.load,
            Channel::Trp => &self.trp,
        }
    }

    pub fn any(&self) -> bool {
        self.price.iter().chain(&self.load).chain(&self.trp).any(|&b| b)
    }
}

/// One calendar day of aligned hourly values, complete after imputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySeries {
    pub date: NaiveDate,
    pub price: [f64; HOURS],
    pub load: [f64; HOURS],
    pub trp: [f64; HOURS],
    pub imputed: ImputedMask,
}

impl DaySeries {
    pub fn channel(&self, ch: Channel) -> &[f64; HOURS] {
        match ch {
            Channel::Price => &self.price,
            Channel::Load => &self.load,
            Channel::Trp => &self.trp,
        }
    }
}

/// Strictly consecutive sequence of complete days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTable {
    days: Vec<DaySeries>,
}

impl DayTable {
    /// Wrap pre-built days, checking the gapless-date invariant.
    pub fn new(days: Vec<DaySeries>) -> Result<Self, IngestError> {
        if days.is_empty() {
            return Err(IngestError::Empty);
        }
        for w in days.windows(2) {
            if w[1].date != w[0].date + Duration::days(1) {
                return Err(IngestError::UnrecoverableGap {
                    channel: Channel::Price,
                    start: w[0].date,
                    end: w[1].date,
                });
            }
        }
        Ok(DayTable { days })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.days[0].date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.days[self.days.len() - 1].date
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn days(&self) -> &[DaySeries] {
        &self.days
    }

    pub fn get(&self, date: NaiveDate) -> Option<&DaySeries> {
        let offset = (date - self.start_date()).num_days();
        if offset < 0 {
            return None;
        }
        self.days.get(offset as usize)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.get(date).is_some()
    }
}

/// Column mapping for the hourly CSV export, externalized so the real agency
/// export and the synthetic generator can share one parser.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub delimiter: char,
    pub timestamp: String,
    pub price: String,
    pub residual_load: String,
    pub trp: String,
    /// Explicit chrono format; when unset, a few common layouts are tried.
    pub timestamp_format: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            delimiter: ';',
            timestamp: "timestamp".into(),
            price: "price".into(),
            residual_load: "residual_load".into(),
            trp: "trp".into(),
            timestamp_format: None,
        }
    }
}

/// How to treat two rows landing on the same (date, hour) slot.
///
/// Daylight-saving fall-back produces a legitimately duplicated wall-clock
/// hour; `Normalize` averages the duplicates into the single slot (and the
/// spring-forward hole is left missing for hour-level imputation), while
/// `Reject` treats any duplicate as corrupt input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DstPolicy {
    #[default]
    Reject,
    Normalize,
}

const FALLBACK_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
];

fn parse_timestamp(raw: &str, schema: &CsvSchema) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Some(fmt) = &schema.timestamp_format {
        return NaiveDateTime::parse_from_str(raw, fmt).ok();
    }
    FALLBACK_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
}

fn parse_cell(raw: &str) -> Option<f64> {
    let v: f64 = raw.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Parse an hourly CSV stream into records, preserving file order.
///
/// Unparseable numeric cells become missing values; a malformed header or an
/// unparseable timestamp is an error.
pub fn parse_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<Vec<HourlyRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(true)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| IngestError::Schema(format!("unreadable header row: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::Schema(format!("missing column {name:?}")))
    };
    let ts_col = col(&schema.timestamp)?;
    let price_col = col(&schema.price)?;
    let load_col = col(&schema.residual_load)?;
    let trp_col = col(&schema.trp)?;

    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let row = row.map_err(|e| IngestError::Schema(format!("line {line}: {e}")))?;
        let raw_ts = row.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts, schema).ok_or_else(|| IngestError::Timestamp {
            line,
            value: raw_ts.to_string(),
        })?;
        let cell = |i: usize| row.get(i).and_then(parse_cell);
        records.push(HourlyRecord {
            date: ts.date(),
            hour: ts.format("%H").to_string().parse::<u8>().unwrap_or(0),
            price: cell(price_col),
            residual_load: cell(load_col),
            trp: cell(trp_col),
        });
    }
    Ok(records)
}

/// Working form of one channel over the full date range.
struct ChannelGrid {
    channel: Channel,
    /// Flattened day-major hourly values.
    cells: Vec<Option<f64>>,
    imputed: Vec<bool>,
}

impl ChannelGrid {
    fn new(channel: Channel, n_days: usize) -> Self {
        ChannelGrid {
            channel,
            cells: vec![None; n_days * HOURS],
            imputed: vec![false; n_days * HOURS],
        }
    }

    /// Hour-level pass: fill each missing cell whose immediate neighbors in
    /// the flattened hourly sequence are both present.
    fn impute_hours(&mut self) -> usize {
        let mut filled = 0;
        for i in 0..self.cells.len() {
            if self.cells[i].is_some() {
                continue;
            }
            if i == 0 || i + 1 == self.cells.len() {
                continue;
            }
            if let (Some(prev), Some(next)) = (self.cells[i - 1], self.cells[i + 1]) {
                self.cells[i] = Some(0.5 * (prev + next));
                self.imputed[i] = true;
                filled += 1;
            }
        }
        filled
    }

    fn day_complete(&self, d: usize) -> bool {
        self.cells[d * HOURS..(d + 1) * HOURS].iter().all(Option::is_some)
    }

    fn day_fully_missing(&self, d: usize) -> bool {
        self.cells[d * HOURS..(d + 1) * HOURS].iter().all(Option::is_none)
    }

    /// Day-level pass: a fully missing day becomes the elementwise mean of
    /// its two adjacent days, which must be complete.
    fn impute_days(&mut self, start: NaiveDate) -> Result<(), IngestError> {
        let n_days = self.cells.len() / HOURS;
        let missing: Vec<usize> = (0..n_days).filter(|&d| self.day_fully_missing(d)).collect();
        for d in missing {
            let ok = d > 0 && d + 1 < n_days && self.day_complete(d - 1) && self.day_complete(d + 1);
            if !ok {
                return Err(IngestError::UnrecoverableGap {
                    channel: self.channel,
                    start: start + Duration::days(d as i64 - 1),
                    end: start + Duration::days(d as i64 + 1),
                });
            }
            for h in 0..HOURS {
                let prev = self.cells[(d - 1) * HOURS + h].expect("checked complete");
                let next = self.cells[(d + 1) * HOURS + h].expect("checked complete");
                self.cells[d * HOURS + h] = Some(0.5 * (prev + next));
                self.imputed[d * HOURS + h] = true;
            }
        }
        Ok(())
    }

    /// Error range for whatever is still missing, if anything.
    fn check_complete(&self, start: NaiveDate) -> Result<(), IngestError> {
        let first = self.cells.iter().position(Option::is_none);
        if let Some(first) = first {
            let last = self.cells.iter().rposition(Option::is_none).unwrap_or(first);
            return Err(IngestError::UnrecoverableGap {
                channel: self.channel,
                start: start + Duration::days((first / HOURS) as i64),
                end: start + Duration::days((last / HOURS) as i64),
            });
        }
        Ok(())
    }
}

/// Assemble records into a contiguous, fully imputed day table.
pub fn build_day_table(records: &[HourlyRecord], dst: DstPolicy) -> Result<DayTable, IngestError> {
    if records.is_empty() {
        return Err(IngestError::Empty);
    }

    // Group by (date, hour); duplicates either reject or collect for averaging.
    let mut slots: BTreeMap<(NaiveDate, u8), Vec<&HourlyRecord>> = BTreeMap::new();
    for rec in records {
        debug_assert!(rec.hour < 24);
        let entry = slots.entry((rec.date, rec.hour)).or_default();
        if !entry.is_empty() && dst == DstPolicy::Reject {
            return Err(IngestError::Duplicate {
                date: rec.date,
                hour: rec.hour,
            });
        }
        entry.push(rec);
    }

    let start = slots.keys().next().expect("nonempty").0;
    let end = slots.keys().next_back().expect("nonempty").0;
    let n_days = (end - start).num_days() as usize + 1;

    let mut grids: Vec<ChannelGrid> = Channel::ALL
        .iter()
        .map(|&ch| ChannelGrid::new(ch, n_days))
        .collect();
    for ((date, hour), recs) in &slots {
        let idx = (*date - start).num_days() as usize * HOURS + *hour as usize;
        for grid in &mut grids {
            let present: Vec<f64> = recs.iter().filter_map(|r| r.get(grid.channel)).collect();
            if !present.is_empty() {
                grid.cells[idx] = Some(present.iter().sum::<f64>() / present.len() as f64);
            }
        }
    }

    for grid in &mut grids {
        grid.impute_hours();
        grid.impute_days(start)?;
        grid.impute_hours();
        grid.check_complete(start)?;
    }

    let mut days = Vec::with_capacity(n_days);
    for d in 0..n_days {
        let mut day = DaySeries {
            date: start + Duration::days(d as i64),
            price: [0.0; HOURS],
            load: [0.0; HOURS],
            trp: [0.0; HOURS],
            imputed: ImputedMask::default(),
        };
        for grid in &grids {
            for h in 0..HOURS {
                let v = grid.cells[d * HOURS + h].expect("complete after imputation");
                let flag = grid.imputed[d * HOURS + h];
                match grid.channel {
                    Channel::Price => {
                        day.price[h] = v;
                        day.imputed.price[h] = flag;
                    }
                    Channel::Load => {
                        day.load[h] = v;
                        day.imputed.load[h] = flag;
                    }
                    Channel::Trp => {
                        day.trp[h] = v;
                        day.imputed.trp[h] = flag;
                    }
                }
            }
        }
        days.push(day);
    }
    DayTable::new(days)
}
