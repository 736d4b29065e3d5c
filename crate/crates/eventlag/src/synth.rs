//! Synthetic brands with planted events and a ground-truth manifest.
//!
//! Each signal event follows one of three shape families, built day by day
//! from a growth rate and a relaxation rate plus Gaussian slope noise. A
//! fraction of signal events can be coupled to a target event starting a
//! fixed number of days later; the remaining target events are independent.

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, Weekday};
use eventlag_core::predict::EventSpan;
use eventlag_core::significance::randomize_targets;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ingest::{Transaction, TweetCounts};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    PeakCentered,
    LongRelaxation,
    LongGrowth,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 3] = [
        ShapeFamily::PeakCentered,
        ShapeFamily::LongRelaxation,
        ShapeFamily::LongGrowth,
    ];

    /// Share of the event spent growing.
    pub fn growth_fraction(self) -> f64 {
        match self {
            ShapeFamily::PeakCentered => 0.5,
            ShapeFamily::LongRelaxation => 0.2,
            ShapeFamily::LongGrowth => 0.8,
        }
    }

    /// Per-day change while growing and while relaxing.
    pub fn rates(self) -> (f64, f64) {
        match self {
            ShapeFamily::PeakCentered => (0.5, -0.5),
            ShapeFamily::LongRelaxation => (1.0, -0.25),
            ShapeFamily::LongGrowth => (0.25, -1.0),
        }
    }

    /// Day of the peak for an event of `len` days.
    pub fn peak_offset(self, len: usize) -> usize {
        let g = (len as f64 * self.growth_fraction()).round() as usize;
        g.clamp(1, len.saturating_sub(2).max(1))
    }

    /// Event values starting at 0, with `N(0, slope_noise)` added to every
    /// daily increment.
    pub fn profile<R: Rng + ?Sized>(self, len: usize, slope_noise: f64, rng: &mut R) -> Vec<f64> {
        let peak = self.peak_offset(len);
        let (up, down) = self.rates();
        let mut v = Vec::with_capacity(len);
        let mut x = 0.0;
        v.push(x);
        for i in 1..len {
            let noise: f64 = rng.sample(StandardNormal);
            x += if i <= peak { up } else { down } + slope_noise * noise;
            v.push(x);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub brands: usize,
    pub days: usize,
    pub start_date: NaiveDate,
    pub signal_events: usize,
    /// Target events not tied to any signal event.
    pub independent_targets: usize,
    /// Share of signal events followed by a target event `lag` days later.
    pub coupling_fraction: f64,
    pub lag: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub slope_noise: f64,
    /// Day-level noise on both series.
    pub noise: bool,
    /// Leading days kept free of planted events so detectors have history.
    pub warmup: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            brands: 3,
            days: 730,
            start_date: NaiveDate::from_ymd_opt(2013, 1, 7).expect("valid date"),
            signal_events: 12,
            independent_targets: 8,
            coupling_fraction: 0.0,
            lag: 3,
            min_len: 12,
            max_len: 42,
            slope_noise: 0.1,
            noise: true,
            warmup: 56,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.brands == 0 || self.days == 0 {
            return bad("brands and days must be positive".into());
        }
        if self.min_len < 3 || self.min_len > self.max_len {
            return bad(format!(
                "event lengths {}..={} must satisfy 3 <= min <= max",
                self.min_len, self.max_len
            ));
        }
        if !(0.0..=1.0).contains(&self.coupling_fraction) {
            return bad(format!("coupling_fraction {} outside [0, 1]", self.coupling_fraction));
        }
        if !(self.slope_noise >= 0.0 && self.slope_noise.is_finite()) {
            return bad(format!("slope_noise {} must be non-negative", self.slope_noise));
        }
        if self.warmup >= self.days {
            return bad(format!("warmup {} leaves no room in {} days", self.warmup, self.days));
        }
        Ok(())
    }
}

/// A planted event on a brand's day axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub start: usize,
    pub len: usize,
    pub peak: usize,
    pub family: ShapeFamily,
    /// Index of the coupled event on the other channel.
    pub partner: Option<usize>,
}

impl PlantedEvent {
    pub fn end(&self) -> usize {
        self.start + self.len - 1
    }

    pub fn span(&self, id: u32) -> EventSpan {
        EventSpan::new(id, self.start, self.len, self.peak)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandTruth {
    pub brand: String,
    pub start_date: NaiveDate,
    pub days: usize,
    pub signal: Vec<PlantedEvent>,
    pub target: Vec<PlantedEvent>,
    /// Signal events picked for coupling whose target did not fit.
    pub collisions: Vec<usize>,
}

impl BrandTruth {
    /// Signal and target spans with ids counted from `first_id`.
    pub fn spans(&self, first_id: u32) -> (Vec<EventSpan>, Vec<EventSpan>) {
        let signal: Vec<EventSpan> = self
            .signal
            .iter()
            .enumerate()
            .map(|(i, e)| e.span(first_id + i as u32))
            .collect();
        let base = first_id + signal.len() as u32;
        let target = self
            .target
            .iter()
            .enumerate()
            .map(|(i, e)| e.span(base + i as u32))
            .collect();
        (signal, target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub spec: SynthSpec,
    pub brands: Vec<BrandTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub tweets: Vec<TweetCounts>,
    pub transactions: Vec<Transaction>,
    pub manifest: Manifest,
}

fn random_family<R: Rng + ?Sized>(rng: &mut R) -> ShapeFamily {
    ShapeFamily::ALL[rng.random_range(0..3)]
}

fn overlaps(a_start: usize, a_len: usize, placed: &[PlantedEvent]) -> bool {
    let a_end = a_start + a_len - 1;
    placed.iter().any(|p| a_start <= p.end() && p.start <= a_end)
}

/// Event layout for one brand.
pub fn plant_brand<R: Rng + ?Sized>(spec: &SynthSpec, brand: &str, rng: &mut R) -> Result<BrandTruth> {
    spec.validate()?;
    let room = spec.days - spec.warmup;
    let draw = |rng: &mut R, n: usize| -> Vec<(usize, ShapeFamily)> {
        (0..n)
            .map(|_| (rng.random_range(spec.min_len..=spec.max_len), random_family(rng)))
            .collect()
    };

    let kinds = draw(rng, spec.signal_events);
    let proto: Vec<EventSpan> = kinds
        .iter()
        .enumerate()
        .map(|(i, &(len, _))| EventSpan::new(i as u32, 0, len, 0))
        .collect();
    let placed = randomize_targets(&proto, room, rng)?;
    let mut signal: Vec<PlantedEvent> = placed
        .iter()
        .map(|s| {
            let family = kinds[s.id as usize].1;
            let start = s.start + spec.warmup;
            PlantedEvent {
                start,
                len: s.len,
                peak: start + family.peak_offset(s.len),
                family,
                partner: None,
            }
        })
        .collect();

    let n_coupled = (spec.coupling_fraction * signal.len() as f64).round() as usize;
    let mut chosen = index::sample(rng, signal.len(), n_coupled).into_vec();
    chosen.sort_unstable();
    let mut target: Vec<PlantedEvent> = Vec::new();
    let mut collisions = Vec::new();
    for i in chosen {
        let (len, family) = draw(rng, 1)[0];
        let start = signal[i].start + spec.lag;
        if start + len > spec.days || overlaps(start, len, &target) {
            collisions.push(i);
            continue;
        }
        target.push(PlantedEvent {
            start,
            len,
            peak: start + family.peak_offset(len),
            family,
            partner: Some(i),
        });
    }

    let extra = draw(rng, spec.independent_targets);
    if target.is_empty() {
        let proto: Vec<EventSpan> = extra
            .iter()
            .enumerate()
            .map(|(i, &(len, _))| EventSpan::new(i as u32, 0, len, 0))
            .collect();
        for s in randomize_targets(&proto, room, rng)? {
            let family = extra[s.id as usize].1;
            let start = s.start + spec.warmup;
            target.push(PlantedEvent {
                start,
                len: s.len,
                peak: start + family.peak_offset(s.len),
                family,
                partner: None,
            });
        }
    } else {
        for (len, family) in extra {
            let mut placed = false;
            for _ in 0..10_000 {
                if len > room {
                    break;
                }
                let start = rng.random_range(spec.warmup..=spec.days - len);
                if !overlaps(start, len, &target) {
                    target.push(PlantedEvent {
                        start,
                        len,
                        peak: start + family.peak_offset(len),
                        family,
                        partner: None,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                let total = target.iter().map(|t| t.len).sum::<usize>() + len;
                return Err(eventlag_core::Error::Infeasible {
                    total,
                    len: spec.days,
                }
                .into());
            }
        }
    }
    target.sort_by_key(|t| t.start);
    for (ti, t) in target.iter().enumerate() {
        if let Some(si) = t.partner {
            signal[si].partner = Some(ti);
        }
    }
    Ok(BrandTruth {
        brand: brand.to_string(),
        start_date: spec.start_date,
        days: spec.days,
        signal,
        target,
        collisions,
    })
}

fn add_events<R: Rng + ?Sized>(
    profile: &mut [f64],
    events: &[PlantedEvent],
    slope_noise: f64,
    rng: &mut R,
) {
    for e in events {
        for (i, v) in e.family.profile(e.len, slope_noise, rng).into_iter().enumerate() {
            profile[e.start + i] += v;
        }
    }
}

/// Tweet counts and transactions for one planted brand.
pub fn render_brand<R: Rng + ?Sized>(
    truth: &BrandTruth,
    spec: &SynthSpec,
    rng: &mut R,
) -> (Vec<TweetCounts>, Vec<Transaction>) {
    let mut signal = vec![0.0; truth.days];
    let mut target = vec![0.0; truth.days];
    add_events(&mut signal, &truth.signal, spec.slope_noise, rng);
    add_events(&mut target, &truth.target, spec.slope_noise, rng);
    let noise_scale = if spec.noise { 1.0 } else { 0.0 };
    let normal = |rng: &mut R| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        z * noise_scale
    };

    let mut tweets = Vec::with_capacity(truth.days);
    let mut transactions = Vec::new();
    for day in 0..truth.days {
        let date = truth.start_date + Duration::days(day as i64);
        let ratio = (0.5 + 0.03 * normal(rng) + 0.05 * signal[day]).max(0.01);
        let pos = (300.0 + 20.0 * normal(rng)).round().max(1.0) as u64;
        let neg = (ratio * pos as f64).round() as u64;
        tweets.push(TweetCounts {
            date,
            brand_id: truth.brand.clone(),
            pos,
            neg,
            volume: pos + neg + pos / 2,
        });

        let friday = if date.weekday() == Weekday::Fri { 0.25 } else { 0.0 };
        let revenue = (1000.0 * (1.0 + friday) + 40.0 * normal(rng) + 60.0 * target[day]).max(1.0);
        let parts = rng.random_range(1..=3usize);
        let mut hours = index::sample(rng, 12, parts).into_vec();
        hours.sort_unstable();
        let weights: Vec<f64> = (0..parts).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = weights.iter().sum();
        for (h, w) in hours.into_iter().zip(weights) {
            let value = (revenue * w / total * 100.0).round() / 100.0;
            transactions.push(Transaction {
                timestamp: date.and_time(NaiveTime::from_hms_opt(9 + h as u32, 0, 0).expect("valid hour")),
                brand_id: truth.brand.clone(),
                value,
            });
        }
    }
    (tweets, transactions)
}

pub fn brand_name(i: usize) -> String {
    format!("brand-{:02}", i + 1)
}

/// Planted brands rendered as the two CSV inputs, plus the manifest.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<SynthData> {
    spec.validate()?;
    let mut tweets = Vec::new();
    let mut transactions = Vec::new();
    let mut brands = Vec::with_capacity(spec.brands);
    for b in 0..spec.brands {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let truth = plant_brand(spec, &brand_name(b), &mut rng)?;
        let (t, x) = render_brand(&truth, spec, &mut rng);
        tweets.extend(t);
        transactions.extend(x);
        brands.push(truth);
    }
    Ok(SynthData {
        tweets,
        transactions,
        manifest: Manifest {
            seed,
            spec: spec.clone(),
            brands,
        },
    })
}

/// Stand-alone event shape with its family.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolShape {
    pub family: ShapeFamily,
    pub values: Vec<f64>,
}

/// `per_family` events of each family with lengths in `min_len..=max_len`,
/// slope noise `slope_noise` and a random vertical offset in `[-1, 1)`.
pub fn shape_pool(
    per_family: usize,
    min_len: usize,
    max_len: usize,
    slope_noise: f64,
    seed: u64,
) -> Vec<PoolShape> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * per_family);
    for _ in 0..per_family {
        for family in ShapeFamily::ALL {
            let len = rng.random_range(min_len..=max_len);
            let shift = rng.random_range(-1.0..1.0);
            let values = family
                .profile(len, slope_noise, &mut rng)
                .into_iter()
                .map(|v| v + shift)
                .collect();
            out.push(PoolShape { family, values });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_have_expected_peaks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in ShapeFamily::ALL {
            let v = f.profile(20, 0.0, &mut rng);
            let argmax = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, f.peak_offset(20));
        }
        assert_eq!(ShapeFamily::LongRelaxation.peak_offset(20), 4);
        assert_eq!(ShapeFamily::LongGrowth.peak_offset(20), 16);
    }

    #[test]
    fn no_coupling_marks_everything_independent() {
        let data = generate_synthetic(&SynthSpec::default(), 5).unwrap();
        for b in &data.manifest.brands {
            assert!(b.signal.iter().all(|e| e.partner.is_none()));
            assert!(b.target.iter().all(|e| e.partner.is_none()));
        }
    }

    #[test]
    fn full_coupling_at_lag_two() {
        let spec = SynthSpec {
            coupling_fraction: 1.0,
            lag: 2,
            noise: false,
            independent_targets: 0,
            min_len: 7,
            max_len: 10,
            ..SynthSpec::default()
        };
        let data = generate_synthetic(&spec, 9).unwrap();
        for b in &data.manifest.brands {
            for (i, s) in b.signal.iter().enumerate() {
                match s.partner {
                    Some(t) => assert_eq!(b.target[t].start, s.start + 2),
                    None => assert!(b.collisions.contains(&i)),
                }
            }
        }
    }

    #[test]
    fn planted_events_do_not_overlap() {
        let spec = SynthSpec {
            coupling_fraction: 0.6,
            ..SynthSpec::default()
        };
        let data = generate_synthetic(&spec, 2).unwrap();
        for b in &data.manifest.brands {
            for list in [&b.signal, &b.target] {
                for w in list.windows(2) {
                    assert!(w[0].end() < w[1].start);
                }
                assert!(list.iter().all(|e| e.end() < b.days && e.start >= spec.warmup));
            }
        }
    }

    #[test]
    fn too_many_events_is_infeasible() {
        let spec = SynthSpec {
            days: 200,
            signal_events: 20,
            ..SynthSpec::default()
        };
        assert!(matches!(
            generate_synthetic(&spec, 1),
            Err(Error::Core(eventlag_core::Error::Infeasible { .. }))
        ));
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec::default();
        assert_eq!(generate_synthetic(&spec, 3).unwrap(), generate_synthetic(&spec, 3).unwrap());
    }
}
