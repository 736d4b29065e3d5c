//! CSV inputs and their conversion into daily series.
//!
//! Transactions: `timestamp,brand_id,value`, one row per sale. Tweet counts:
//! `date,brand_id,pos,neg,volume`, one row per brand and day. Both readers
//! fail on the first malformed row and report its line number.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, NaiveTime};
use eventlag_core::series::{Channel, DailySeries};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetCounts {
    pub date: NaiveDate,
    pub brand_id: String,
    pub pos: u64,
    pub neg: u64,
    pub volume: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub timestamp: NaiveDateTime,
    pub brand_id: String,
    pub value: f64,
}

/// Which quantity of the tweet counts becomes the signal series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalChannel {
    #[default]
    Ratio,
    Volume,
}

/// Negative over positive count, or positive over negative when `invert`.
pub fn sentiment_ratio(counts: &TweetCounts, invert: bool) -> Result<f64> {
    let (num, den) = if invert {
        (counts.pos, counts.neg)
    } else {
        (counts.neg, counts.pos)
    };
    if den == 0 {
        return Err(Error::ZeroDenominator {
            brand: counts.brand_id.clone(),
            date: counts.date,
        });
    }
    Ok(num as f64 / den as f64)
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn parse_error(path: &Path, row: usize, message: impl ToString) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        message: message.to_string(),
    }
}

fn row_of(e: &csv::Error, fallback: usize) -> usize {
    e.position().map_or(fallback, |p| p.line() as usize)
}

pub fn read_tweet_counts(path: &Path) -> Result<Vec<TweetCounts>> {
    let mut rdr = open(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<TweetCounts>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_error(path, row_of(&e, row), e))?;
        if rec.pos + rec.neg > rec.volume {
            return Err(parse_error(
                path,
                row,
                format!("pos {} + neg {} exceeds volume {}", rec.pos, rec.neg, rec.volume),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RawTransaction {
    timestamp: String,
    brand_id: String,
    value: f64,
}

/// RFC 3339 (kept in its own offset), naive date-time, or bare date.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_local());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_time(NaiveTime::MIN))
}

pub fn read_transactions(path: &Path) -> Result<Vec<Transaction>> {
    let mut rdr = open(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RawTransaction>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| parse_error(path, row_of(&e, row), e))?;
        let timestamp = parse_timestamp(&rec.timestamp)
            .ok_or_else(|| parse_error(path, row, format!("bad timestamp {:?}", rec.timestamp)))?;
        if !rec.value.is_finite() {
            return Err(parse_error(path, row, "value is not finite"));
        }
        out.push(Transaction {
            timestamp,
            brand_id: rec.brand_id,
            value: rec.value,
        });
    }
    Ok(out)
}

fn days_between(first: NaiveDate, last: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    let n = (last - first).num_days();
    (0..=n).map(move |i| first + Duration::days(i))
}

/// Daily revenue per brand. Values of one day are summed in sorted order so
/// the result does not depend on row order. Days without sales inside a
/// brand's range are 0 and marked filled.
pub fn aggregate_transactions(rows: &[Transaction]) -> Result<Vec<DailySeries>> {
    let mut by_brand: BTreeMap<&str, BTreeMap<NaiveDate, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        by_brand
            .entry(&r.brand_id)
            .or_default()
            .entry(r.timestamp.date())
            .or_default()
            .push(r.value);
    }
    let mut out = Vec::with_capacity(by_brand.len());
    for (brand, days) in by_brand {
        let (&first, _) = days.first_key_value().expect("brand has rows");
        let (&last, _) = days.last_key_value().expect("brand has rows");
        let mut values = Vec::new();
        let mut filled = Vec::new();
        for d in days_between(first, last) {
            match days.get(&d) {
                Some(v) => {
                    let mut v = v.clone();
                    v.sort_by(f64::total_cmp);
                    values.push(v.iter().sum());
                    filled.push(false);
                }
                None => {
                    values.push(0.0);
                    filled.push(true);
                }
            }
        }
        out.push(DailySeries::with_filled(brand, Channel::Target, first, values, filled)?);
    }
    Ok(out)
}

/// Signal series per brand from tweet counts. Duplicate rows for a day are
/// summed. Days with no usable ratio (missing, or no messages in the
/// denominator) repeat the previous ratio, or the first usable one at the
/// start of a series, and are marked filled. Missing days have volume 0.
pub fn signal_series(
    rows: &[TweetCounts],
    channel: SignalChannel,
    invert: bool,
) -> Result<Vec<DailySeries>> {
    let mut by_brand: BTreeMap<&str, BTreeMap<NaiveDate, TweetCounts>> = BTreeMap::new();
    for r in rows {
        if r.pos + r.neg > r.volume {
            return Err(Error::Data(format!(
                "{} {}: pos + neg exceeds volume",
                r.brand_id, r.date
            )));
        }
        by_brand
            .entry(&r.brand_id)
            .or_default()
            .entry(r.date)
            .and_modify(|c| {
                c.pos += r.pos;
                c.neg += r.neg;
                c.volume += r.volume;
            })
            .or_insert_with(|| r.clone());
    }
    let mut out = Vec::with_capacity(by_brand.len());
    for (brand, days) in by_brand {
        let (&first, _) = days.first_key_value().expect("brand has rows");
        let (&last, _) = days.last_key_value().expect("brand has rows");
        let mut values: Vec<Option<f64>> = Vec::new();
        let mut filled = Vec::new();
        for d in days_between(first, last) {
            let day = days.get(&d);
            let v = match (channel, day) {
                (SignalChannel::Volume, Some(c)) => Some(c.volume as f64),
                (SignalChannel::Volume, None) => Some(0.0),
                (SignalChannel::Ratio, Some(c)) => match sentiment_ratio(c, invert) {
                    Ok(r) => Some(r),
                    Err(e) => {
                        log::warn!("{e}; carrying the previous ratio");
                        None
                    }
                },
                (SignalChannel::Ratio, None) => None,
            };
            filled.push(day.is_none() || v.is_none());
            values.push(v);
        }
        let Some(first_valid) = values.iter().flatten().next().copied() else {
            return Err(Error::Data(format!("{brand}: no day with a usable ratio")));
        };
        let mut prev = first_valid;
        let values = values
            .into_iter()
            .map(|v| {
                prev = v.unwrap_or(prev);
                prev
            })
            .collect();
        out.push(DailySeries::with_filled(brand, Channel::Signal, first, values, filled)?);
    }
    Ok(out)
}

/// Restrict both series to their common dates.
pub fn align(signal: &DailySeries, target: &DailySeries) -> Result<(DailySeries, DailySeries)> {
    let start = signal.start_date().max(target.start_date());
    let end = signal
        .date_of(signal.len() - 1)
        .min(target.date_of(target.len() - 1));
    if end < start {
        return Err(Error::Data(format!(
            "{}: signal and target dates do not overlap",
            signal.brand_id()
        )));
    }
    let cut = |s: &DailySeries| -> Result<DailySeries> {
        let a = s.index_of(start).expect("start inside series");
        let b = s.index_of(end).expect("end inside series");
        Ok(DailySeries::with_filled(
            s.brand_id(),
            s.channel(),
            start,
            s.values()[a..=b].to_vec(),
            s.filled()[a..=b].to_vec(),
        )?)
    };
    Ok((cut(signal)?, cut(target)?))
}

/// Signal and target series of one brand on the same dates.
#[derive(Debug, Clone, PartialEq)]
pub struct BrandSeries {
    pub brand: String,
    pub signal: DailySeries,
    pub target: DailySeries,
}

/// Pair up brands present in both inputs. Brands found in only one input
/// are skipped with a warning.
pub fn pair_brands(signal: Vec<DailySeries>, target: Vec<DailySeries>) -> Result<Vec<BrandSeries>> {
    let mut targets: BTreeMap<String, DailySeries> = target
        .into_iter()
        .map(|t| (t.brand_id().to_string(), t))
        .collect();
    let mut out = Vec::new();
    for s in signal {
        match targets.remove(s.brand_id()) {
            Some(t) => {
                let (s, t) = align(&s, &t)?;
                out.push(BrandSeries {
                    brand: s.brand_id().to_string(),
                    signal: s,
                    target: t,
                });
            }
            None => log::warn!("{}: no transactions, skipped", s.brand_id()),
        }
    }
    for brand in targets.keys() {
        log::warn!("{brand}: no tweet counts, skipped");
    }
    if out.is_empty() {
        return Err(Error::Data("no brand has both tweet counts and transactions".into()));
    }
    Ok(out)
}

pub fn write_tweet_counts(path: &Path, rows: &[TweetCounts]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_transactions(path: &Path, rows: &[Transaction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["timestamp", "brand_id", "value"])
        .map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.write_record([
            r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.brand_id.clone(),
            r.value.to_string(),
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}
