//! Event dumps, one JSON object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use eventlag_core::events::{event_series, EventSignature};
use eventlag_core::predict::EventSpan;
use eventlag_core::series::{Channel, DailySeries};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub id: u32,
    pub brand: String,
    pub channel: Channel,
    pub series_start: NaiveDate,
    pub series_days: usize,
    pub start_index: usize,
    pub peak_date: NaiveDate,
    pub peak_index: usize,
    pub peak_value: f64,
    pub growth_dates: Vec<NaiveDate>,
    pub relaxation_dates: Vec<NaiveDate>,
    /// Normalized values over the whole event.
    pub values: Vec<f64>,
    pub member_spike_dates: Vec<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
}

impl EventRecord {
    /// `series` is the normalized series the event was extracted from.
    pub fn new(event: &EventSignature, series: &DailySeries) -> Result<Self> {
        let values = event_series(event, series)?.into_iter().map(|p| p.1).collect();
        let dates = |ix: &[usize]| ix.iter().map(|&i| series.date_of(i)).collect();
        Ok(Self {
            id: event.id,
            brand: event.brand_id.clone(),
            channel: event.channel,
            series_start: series.start_date(),
            series_days: series.len(),
            start_index: event.start(),
            peak_date: series.date_of(event.peak_index),
            peak_index: event.peak_index,
            peak_value: event.peak_value,
            growth_dates: dates(&event.growth),
            relaxation_dates: dates(&event.relaxation),
            values,
            member_spike_dates: dates(&event.member_spikes),
            cluster: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn span(&self) -> EventSpan {
        EventSpan::new(self.id, self.start_index, self.len(), self.peak_index)
            .with_cluster(self.cluster)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let n = self.len();
        if n == 0 {
            return Err("event has no values".into());
        }
        if n != self.growth_dates.len() + 1 + self.relaxation_dates.len() {
            return Err("values do not cover growth, peak and relaxation".into());
        }
        if self.start_index + n > self.series_days {
            return Err("event runs past the end of its series".into());
        }
        if self.peak_index != self.start_index + self.growth_dates.len() {
            return Err("peak index disagrees with growth dates".into());
        }
        Ok(())
    }
}

pub fn write_jsonl(path: &Path, records: &[EventRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<EventRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            message,
        };
        let rec: EventRecord = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        rec.check().map_err(parse)?;
        out.push(rec);
    }
    Ok(out)
}
