//! Moving-window spike detectors.
//!
//! Each detector compares a day against a baseline window built by
//! [`window_values`](crate::series::window_values) and produces a flag and a
//! standardized deviation score:
//!
//! * ESD: `|x - mean| >= t * sd`, mean and sample sd over the window.
//! * Hampel: `|x - median| >= g * MAD` with `g = threshold * 1.4826`.
//! * IQR: `x` outside `[Q1 - k * IQR, Q3 + k * IQR]`, type-7 quantiles.
//!
//! By default ESD evaluates the candidate inside its own window statistics
//! while Hampel and IQR keep it out of the baseline; the window's
//! `include_current` switch overrides this.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::series::{window_values, DailySeries, WindowSpec};
use crate::{stats, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Esd,
    Hampel,
    Iqr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Only positive deviations (outbursts) are flagged.
    UpperOnly,
    TwoSided,
}

/// Default MAD-to-sigma consistency constant for Gaussian data.
pub const MAD_CONSISTENCY: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub method: Method,
    pub t_esd: f64,
    pub hampel_threshold: f64,
    pub mad_consistency: f64,
    pub iqr_k: f64,
    pub window: WindowSpec,
    pub direction: Direction,
    /// Never flag days that were filled in at ingestion.
    pub skip_filled: bool,
}

impl DetectorConfig {
    /// Defaults for `method`: weekday-aligned window of 7 prior points,
    /// upper-only detection, candidate included in the window for ESD only.
    pub fn new(method: Method) -> Self {
        Self {
            method,
            t_esd: 3.0,
            hampel_threshold: 3.0,
            mad_consistency: MAD_CONSISTENCY,
            iqr_k: 1.5,
            window: WindowSpec::weekday_aligned(7).including_current(method == Method::Esd),
            direction: Direction::UpperOnly,
            skip_filled: true,
        }
    }

    pub fn with_window(mut self, window: WindowSpec) -> Self {
        self.window = window;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_esd", self.t_esd),
            ("hampel_threshold", self.hampel_threshold),
            ("mad_consistency", self.mad_consistency),
            ("iqr_k", self.iqr_k),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{name} must be a positive finite number, got {v}"
                )));
            }
        }
        self.window.validate()
    }

    /// Threshold the score of `method` is compared against.
    pub fn score_threshold(&self) -> f64 {
        match self.method {
            Method::Esd => self.t_esd,
            Method::Hampel => self.hampel_threshold,
            Method::Iqr => self.iqr_k,
        }
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::new(Method::Iqr)
    }
}

/// How a day's score was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMarker {
    /// Regular standardized deviation.
    Scored,
    /// Not enough history for a window; unflagged, score 0.
    Skipped,
    /// Day filled in at ingestion; unflagged, score 0.
    Filled,
    /// ESD window with zero standard deviation.
    SdZero,
    /// Hampel window with MAD = 0: any value off the median is flagged.
    MadZero,
    /// IQR window with Q1 = Q3: any value beyond the quartiles is flagged.
    IqrZero,
}

/// Outcome of testing one value against one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub flagged: bool,
    /// Standardized deviation; `±inf` on the degenerate-scale paths when the
    /// value is off the center, 0 when it is on it.
    pub score: f64,
    pub marker: ScoreMarker,
}

impl Verdict {
    const fn skipped(marker: ScoreMarker) -> Self {
        Self {
            flagged: false,
            score: 0.0,
            marker,
        }
    }
}

fn degenerate(dev: f64, direction: Direction, marker: ScoreMarker) -> Verdict {
    let flagged = match direction {
        Direction::UpperOnly => dev > 0.0,
        Direction::TwoSided => dev != 0.0,
    };
    let score = if dev > 0.0 {
        f64::INFINITY
    } else if dev < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    Verdict {
        flagged,
        score,
        marker,
    }
}

fn exceeds(score: f64, threshold: f64, direction: Direction) -> bool {
    match direction {
        Direction::UpperOnly => score >= threshold,
        Direction::TwoSided => libm::fabs(score) >= threshold,
    }
}

/// ESD rule over `window` (which already contains `x` when the candidate is
/// meant to be part of the statistics).
pub fn esd_verdict(window: &[f64], x: f64, cfg: &DetectorConfig) -> Verdict {
    let mean = stats::mean(window);
    let sd = stats::sample_sd(window);
    let dev = x - mean;
    if sd == 0.0 {
        return degenerate(dev, cfg.direction, ScoreMarker::SdZero);
    }
    let score = dev / sd;
    Verdict {
        flagged: exceeds(score, cfg.t_esd, cfg.direction),
        score,
        marker: ScoreMarker::Scored,
    }
}

/// Hampel identifier with `g = hampel_threshold * mad_consistency`.
pub fn hampel_verdict(window: &[f64], x: f64, cfg: &DetectorConfig) -> Verdict {
    let med = stats::median(window);
    let mad = stats::mad(window);
    let dev = x - med;
    if mad == 0.0 {
        return degenerate(dev, cfg.direction, ScoreMarker::MadZero);
    }
    let score = dev / (cfg.mad_consistency * mad);
    Verdict {
        flagged: exceeds(score, cfg.hampel_threshold, cfg.direction),
        score,
        marker: ScoreMarker::Scored,
    }
}

/// Tukey fences. The upper score is `(x - Q3) / IQR`; in two-sided mode a
/// value below Q1 scores `-(Q1 - x) / IQR`.
pub fn iqr_verdict(window: &[f64], x: f64, cfg: &DetectorConfig) -> Verdict {
    let sorted = stats::sorted(window);
    let q1 = stats::quantile_sorted(&sorted, 0.25);
    let q3 = stats::quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    if iqr == 0.0 {
        let dev = if x > q3 {
            x - q3
        } else if x < q1 {
            x - q1
        } else {
            0.0
        };
        return degenerate(dev, cfg.direction, ScoreMarker::IqrZero);
    }
    let upper = (x - q3) / iqr;
    let lower = (q1 - x) / iqr;
    let (flagged, score) = match cfg.direction {
        // closed range: only values strictly outside are outliers
        Direction::UpperOnly => (upper > cfg.iqr_k, upper),
        Direction::TwoSided if lower > upper => (lower > cfg.iqr_k, -lower),
        Direction::TwoSided => (upper > cfg.iqr_k, upper),
    };
    Verdict {
        flagged,
        score,
        marker: ScoreMarker::Scored,
    }
}

pub fn verdict(window: &[f64], x: f64, cfg: &DetectorConfig) -> Verdict {
    match cfg.method {
        Method::Esd => esd_verdict(window, x, cfg),
        Method::Hampel => hampel_verdict(window, x, cfg),
        Method::Iqr => iqr_verdict(window, x, cfg),
    }
}

/// Per-day flags and scores aligned with the input series.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeMask {
    pub flags: Vec<bool>,
    pub scores: Vec<f64>,
    pub markers: Vec<ScoreMarker>,
}

impl SpikeMask {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flagged_indices(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    /// A mask with the given indices flagged and unit scores, for callers that
    /// obtain spikes from elsewhere.
    pub fn from_flags(flags: Vec<bool>) -> Self {
        let scores = flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
        let markers = alloc::vec![ScoreMarker::Scored; flags.len()];
        Self {
            flags,
            scores,
            markers,
        }
    }
}

/// Run the detector selected by `cfg.method` over every day of `series`.
pub fn detect(series: &DailySeries, cfg: &DetectorConfig) -> Result<SpikeMask> {
    cfg.validate()?;
    let values = series.values();
    let n = values.len();
    let mut mask = SpikeMask {
        flags: alloc::vec![false; n],
        scores: alloc::vec![0.0; n],
        markers: alloc::vec![ScoreMarker::Skipped; n],
    };
    for i in 0..n {
        let v = if cfg.skip_filled && series.filled()[i] {
            Verdict::skipped(ScoreMarker::Filled)
        } else {
            match window_values(values, i, &cfg.window) {
                Ok(window) => verdict(&window, values[i], cfg),
                Err(Error::InsufficientHistory { .. }) => Verdict::skipped(ScoreMarker::Skipped),
                Err(e) => return Err(e),
            }
        };
        mask.flags[i] = v.flagged;
        mask.scores[i] = v.score;
        mask.markers[i] = v.marker;
    }
    Ok(mask)
}

pub fn detect_esd(series: &DailySeries, cfg: &DetectorConfig) -> Result<SpikeMask> {
    detect(series, &DetectorConfig { method: Method::Esd, ..*cfg })
}

pub fn detect_hampel(series: &DailySeries, cfg: &DetectorConfig) -> Result<SpikeMask> {
    detect(series, &DetectorConfig { method: Method::Hampel, ..*cfg })
}

pub fn detect_iqr(series: &DailySeries, cfg: &DetectorConfig) -> Result<SpikeMask> {
    detect(series, &DetectorConfig { method: Method::Iqr, ..*cfg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Channel, WindowSpec};
    use alloc::vec;
    use chrono::NaiveDate;

    fn cfg(method: Method) -> DetectorConfig {
        DetectorConfig::new(method)
    }

    #[test]
    fn esd_masking_example() {
        // nine zeros plus the candidate: mean 1, sd sqrt(10), 9 < 3 sqrt(10)
        let mut window = vec![0.0; 9];
        window.push(10.0);
        let v = esd_verdict(&window, 10.0, &cfg(Method::Esd));
        assert!(!v.flagged);
        assert!((v.score - 9.0 / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_window_candidate_at_constant() {
        let window = vec![4.0; 8];
        for m in [Method::Esd, Method::Hampel, Method::Iqr] {
            let v = verdict(&window, 4.0, &cfg(m));
            assert!(!v.flagged, "{m:?}");
            assert_eq!(v.score, 0.0);
        }
        assert_eq!(iqr_verdict(&window, 4.0, &cfg(Method::Iqr)).marker, ScoreMarker::IqrZero);
    }

    #[test]
    fn hampel_mad_zero_flags_any_departure() {
        let window = vec![0.0; 9];
        let v = hampel_verdict(&window, 10.0, &cfg(Method::Hampel));
        assert!(v.flagged);
        assert_eq!(v.marker, ScoreMarker::MadZero);
        assert_eq!(v.score, f64::INFINITY);
    }

    #[test]
    fn hampel_candidate_at_median() {
        let window: Vec<f64> = (1..=7).map(f64::from).collect();
        assert!(!hampel_verdict(&window, 4.0, &cfg(Method::Hampel)).flagged);
    }

    #[test]
    fn hampel_one_to_nine_with_thirty() {
        let window: Vec<f64> = (1..=9).map(f64::from).collect();
        let v = hampel_verdict(&window, 30.0, &cfg(Method::Hampel));
        assert!(v.flagged);
        // threshold 3 * 1.4826 * 2 = 8.8956 against deviation 25
        assert!((v.score - 25.0 / (1.4826 * 2.0)).abs() < 1e-12);
        assert!(!hampel_verdict(&window, 5.0 + 8.8, &cfg(Method::Hampel)).flagged);
        assert!(hampel_verdict(&window, 5.0 + 8.9, &cfg(Method::Hampel)).flagged);
    }

    #[test]
    fn iqr_golden_window() {
        let window = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 100.0];
        let c = cfg(Method::Iqr);
        for &x in &window {
            let v = iqr_verdict(&window, x, &c);
            assert_eq!(v.flagged, x == 100.0, "x = {x}");
        }
        // upper fence 7.75 + 1.5 * 4.5 = 14.5
        assert!(!iqr_verdict(&window, 14.5, &c).flagged);
        assert!(iqr_verdict(&window, 14.5001, &c).flagged);
    }

    #[test]
    fn two_sided_catches_dips() {
        let window: Vec<f64> = (1..=9).map(f64::from).collect();
        let c = cfg(Method::Iqr).with_direction(Direction::TwoSided);
        let v = iqr_verdict(&window, -40.0, &c);
        assert!(v.flagged && v.score < 0.0);
        assert!(!iqr_verdict(&window, -40.0, &cfg(Method::Iqr)).flagged);
    }

    #[test]
    fn detect_marks_skipped_and_filled_days() {
        let mut values: Vec<f64> = (0..30).map(|i| (i % 3) as f64).collect();
        values[25] = 50.0;
        values[27] = 50.0;
        let mut filled = vec![false; 30];
        filled[27] = true;
        let s = DailySeries::with_filled(
            "b",
            Channel::Target,
            NaiveDate::from_ymd_opt(2014, 1, 1).unwrap(),
            values,
            filled,
        )
        .unwrap();
        let c = cfg(Method::Iqr).with_window(WindowSpec::contiguous(5));
        let mask = detect(&s, &c).unwrap();
        assert_eq!(mask.len(), 30);
        assert!(mask.markers[..5].iter().all(|m| *m == ScoreMarker::Skipped));
        assert!(!mask.flags[..5].iter().any(|&f| f));
        assert_eq!(mask.markers[27], ScoreMarker::Filled);
        assert_eq!(mask.flagged_indices(), vec![25]);
    }

    #[test]
    fn rejects_bad_thresholds() {
        let mut c = cfg(Method::Esd);
        c.t_esd = 0.0;
        assert!(c.validate().is_err());
        c.t_esd = f64::NAN;
        assert!(c.validate().is_err());
    }
}
