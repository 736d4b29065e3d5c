//! Daily series container, z-score normalization and rolling windows.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::{stats, Error, Result};

/// Which side of the analysis a series feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// The predicting series (e.g. daily sentiment ratio).
    Signal,
    /// The predicted series (e.g. daily revenue).
    Target,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Signal => "signal",
            Channel::Target => "target",
        })
    }
}

/// One value per consecutive calendar day for a single brand and channel.
///
/// Day index `i` is the date `start_date + i`. Days that were missing at
/// ingestion and filled in carry a `filled` flag so detectors can skip them.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    brand_id: String,
    channel: Channel,
    start_date: NaiveDate,
    values: Vec<f64>,
    filled: Vec<bool>,
}

impl DailySeries {
    pub fn new(
        brand_id: impl Into<String>,
        channel: Channel,
        start_date: NaiveDate,
        values: Vec<f64>,
    ) -> Result<Self> {
        let filled = alloc::vec![false; values.len()];
        Self::with_filled(brand_id, channel, start_date, values, filled)
    }

    pub fn with_filled(
        brand_id: impl Into<String>,
        channel: Channel,
        start_date: NaiveDate,
        values: Vec<f64>,
        filled: Vec<bool>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if filled.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: filled.len(),
            });
        }
        Ok(Self {
            brand_id: brand_id.into(),
            channel,
            start_date,
            values,
            filled,
        })
    }

    pub fn brand_id(&self) -> &str {
        &self.brand_id
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn start_weekday(&self) -> Weekday {
        self.start_date.weekday()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn filled(&self) -> &[bool] {
        &self.filled
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_of(&self, index: usize) -> NaiveDate {
        self.start_date + Duration::days(index as i64)
    }

    /// Day index of `date`, if it falls inside the series.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let d = (date - self.start_date).num_days();
        (d >= 0 && (d as usize) < self.len()).then_some(d as usize)
    }

    /// Same dates and flags, new values.
    pub fn map_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::with_filled(
            self.brand_id.clone(),
            self.channel,
            self.start_date,
            values,
            self.filled.clone(),
        )
    }
}

/// Standardize a series to zero mean and unit sample standard deviation.
pub fn zscore(series: &DailySeries) -> Result<DailySeries> {
    let xs = series.values();
    if xs.len() < 2 {
        return Err(Error::TooShort {
            len: xs.len(),
            needed: 2,
        });
    }
    let mean = stats::mean(xs);
    let sd = stats::sample_sd(xs);
    if sd == 0.0 || xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::ZeroVariance);
    }
    series.map_values(xs.iter().map(|x| (x - mean) / sd).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// The K days immediately before the query day.
    Contiguous,
    /// The K prior days sharing the query day's weekday (7, 14, ... days back).
    WeekdayAligned,
}

/// Shape of the moving baseline window used by every detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub mode: WindowMode,
    /// Number of prior observations K.
    pub len: usize,
    pub include_current: bool,
    /// Minimum number of prior points needed before a day is evaluated.
    /// `None` means the full `len`.
    pub min_history: Option<usize>,
}

pub const MIN_WINDOW_LEN: usize = 3;

impl WindowSpec {
    pub fn new(mode: WindowMode, len: usize) -> Self {
        Self {
            mode,
            len,
            include_current: false,
            min_history: None,
        }
    }

    pub fn contiguous(len: usize) -> Self {
        Self::new(WindowMode::Contiguous, len)
    }

    pub fn weekday_aligned(len: usize) -> Self {
        Self::new(WindowMode::WeekdayAligned, len)
    }

    pub fn including_current(mut self, include: bool) -> Self {
        self.include_current = include;
        self
    }

    /// Accept windows with at least `ceil(len * fraction)` prior points.
    pub fn with_warmup_fraction(mut self, fraction: f64) -> Self {
        let need = libm::ceil(self.len as f64 * fraction.clamp(0.0, 1.0)) as usize;
        self.min_history = Some(need.max(1));
        self
    }

    pub fn min_required(&self) -> usize {
        self.min_history.unwrap_or(self.len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len < MIN_WINDOW_LEN {
            return Err(Error::InvalidConfig(alloc::format!(
                "window length {} below minimum {MIN_WINDOW_LEN}",
                self.len
            )));
        }
        match self.min_history {
            Some(m) if m == 0 || m > self.len => Err(Error::InvalidConfig(alloc::format!(
                "min_history {m} must lie in 1..={}",
                self.len
            ))),
            _ => Ok(()),
        }
    }

    fn stride(&self) -> usize {
        match self.mode {
            WindowMode::Contiguous => 1,
            WindowMode::WeekdayAligned => 7,
        }
    }
}

/// Values of the window preceding `index`, oldest first, with the value at
/// `index` appended last when `include_current` is set.
pub fn window_at(series: &DailySeries, index: usize, spec: &WindowSpec) -> Result<Vec<f64>> {
    window_values(series.values(), index, spec)
}

/// [`window_at`] over a bare slice.
pub fn window_values(values: &[f64], index: usize, spec: &WindowSpec) -> Result<Vec<f64>> {
    let indices = window_indices(values.len(), index, spec)?;
    Ok(indices.into_iter().map(|i| values[i]).collect())
}

/// Day indices making up the window for `index`, oldest first.
pub fn window_indices(len: usize, index: usize, spec: &WindowSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    let stride = spec.stride();
    let available = (index / stride).min(spec.len);
    if available < spec.min_required() {
        return Err(Error::InsufficientHistory {
            index,
            available,
            needed: spec.min_required(),
        });
    }
    let mut out: Vec<usize> = (1..=available).rev().map(|k| index - k * stride).collect();
    if spec.include_current {
        out.push(index);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn day0() -> NaiveDate {
        // a Monday
        NaiveDate::from_ymd_opt(2013, 11, 4).unwrap()
    }

    fn series(values: Vec<f64>) -> DailySeries {
        DailySeries::new("b", Channel::Signal, day0(), values).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert_eq!(
            DailySeries::new("b", Channel::Signal, day0(), vec![]),
            Err(Error::EmptySeries)
        );
        assert_eq!(
            DailySeries::new("b", Channel::Signal, day0(), vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        );
        assert!(DailySeries::new("b", Channel::Signal, day0(), vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn dates_map_to_indices() {
        let s = series(vec![0.0; 10]);
        assert_eq!(s.date_of(3), NaiveDate::from_ymd_opt(2013, 11, 7).unwrap());
        assert_eq!(s.index_of(s.date_of(9)), Some(9));
        assert_eq!(s.index_of(s.date_of(10)), None);
        assert_eq!(s.start_weekday(), Weekday::Mon);
    }

    #[test]
    fn zscore_of_one_two_three() {
        let z = zscore(&series(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(z.values(), &[-1.0, 0.0, 1.0]);
        assert_eq!(z.start_date(), day0());
    }

    #[test]
    fn zscore_errors() {
        assert_eq!(zscore(&series(vec![5.0, 5.0, 5.0])), Err(Error::ZeroVariance));
        assert!(matches!(
            zscore(&series(vec![5.0])),
            Err(Error::TooShort { len: 1, .. })
        ));
    }

    #[test]
    fn contiguous_window() {
        let s = series((0..10).map(f64::from).collect());
        let spec = WindowSpec::contiguous(3);
        assert_eq!(window_at(&s, 5, &spec).unwrap(), vec![2.0, 3.0, 4.0]);
        let spec = spec.including_current(true);
        assert_eq!(window_at(&s, 5, &spec).unwrap(), vec![2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn weekday_window() {
        let s = series((0..21).map(f64::from).collect());
        // K = 2 is below the window floor; two points are reached with K = 3
        // and a relaxed history requirement instead.
        assert!(window_at(&s, 14, &WindowSpec::weekday_aligned(2)).is_err());
        let spec = WindowSpec {
            len: 3,
            min_history: Some(2),
            ..WindowSpec::weekday_aligned(3)
        };
        assert_eq!(window_at(&s, 14, &spec).unwrap(), vec![0.0, 7.0]);
    }

    #[test]
    fn weekday_window_needs_history() {
        let s = series((0..60).map(f64::from).collect());
        let spec = WindowSpec::weekday_aligned(7);
        assert!(matches!(
            window_at(&s, 6, &spec),
            Err(Error::InsufficientHistory { available: 0, .. })
        ));
        assert_eq!(window_at(&s, 49, &spec).unwrap().len(), 7);
        assert!(window_at(&s, 48, &spec).is_err());
        let warm = spec.with_warmup_fraction(0.5);
        assert_eq!(window_at(&s, 28, &warm).unwrap(), vec![0.0, 7.0, 14.0, 21.0]);
    }

    #[test]
    fn window_len_floor() {
        assert!(WindowSpec::contiguous(2).validate().is_err());
        assert!(WindowSpec::contiguous(3).validate().is_ok());
    }
}
