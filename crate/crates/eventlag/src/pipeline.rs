//! End-to-end run: ingest, normalize, detect, extract events on both
//! channels, optionally cluster signal events, match, and test significance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eventlag_core::clustering::{kmeans, ClusterModel, Distance, ShapeBasis};
use eventlag_core::detect::{detect, DetectorConfig};
use eventlag_core::events::{assemble_events, EventExtractionConfig};
use eventlag_core::predict::CurveLabel;
use eventlag_core::series::{zscore, DailySeries};
use eventlag_core::significance::{BrandEvents, RandomizationConfig, SignificanceReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eventio::EventRecord;
use crate::ingest::{
    aggregate_transactions, pair_brands, read_transactions, read_tweet_counts, signal_series,
    BrandSeries, SignalChannel,
};
use crate::output::{write_error, OutputDir};
use crate::parallel::run_significance_parallel;
use crate::report;
use crate::synth::{generate_synthetic, Manifest, SynthSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSource {
    Files {
        tweets: PathBuf,
        transactions: PathBuf,
    },
    Synthetic {
        #[serde(default)]
        spec: SynthSpec,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k: usize,
    pub distance: Distance,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSource,
    #[serde(default)]
    pub signal_channel: SignalChannel,
    #[serde(default)]
    pub invert_ratio: bool,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub extraction: EventExtractionConfig,
    /// `None` runs the aggregated analysis only.
    #[serde(default)]
    pub clustering: Option<ClusteringConfig>,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    pub randomization: RandomizationConfig,
    /// Also write every run's randomized curves.
    #[serde(default)]
    pub dump_runs: bool,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_HORIZON: u32 = 28;

fn default_horizon() -> u32 {
    DEFAULT_HORIZON
}

impl RunConfig {
    pub fn new(input: InputSource, seed: u64) -> Self {
        Self {
            input,
            signal_channel: SignalChannel::Ratio,
            invert_ratio: false,
            detector: DetectorConfig::default(),
            extraction: EventExtractionConfig::default(),
            clustering: None,
            horizon: DEFAULT_HORIZON,
            randomization: RandomizationConfig::new(seed),
            dump_runs: false,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.extraction.validate()?;
        self.randomization.validate(self.horizon)?;
        if let Some(c) = &self.clustering {
            if c.k == 0 {
                return Err(Error::Config("clustering k must be positive".into()));
            }
        }
        if let InputSource::Synthetic { spec, .. } = &self.input {
            spec.validate()?;
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Read both inputs and pair them by brand.
pub fn load_files(
    tweets: &Path,
    transactions: &Path,
    channel: SignalChannel,
    invert: bool,
) -> Result<Vec<BrandSeries>> {
    let signal = signal_series(&read_tweet_counts(tweets)?, channel, invert)?;
    let target = aggregate_transactions(&read_transactions(transactions)?)?;
    pair_brands(signal, target)
}

pub fn load_inputs(cfg: &RunConfig) -> Result<(Vec<BrandSeries>, Option<Manifest>)> {
    match &cfg.input {
        InputSource::Files {
            tweets,
            transactions,
        } => Ok((
            load_files(tweets, transactions, cfg.signal_channel, cfg.invert_ratio)?,
            None,
        )),
        InputSource::Synthetic { spec, seed } => {
            let data = generate_synthetic(spec, *seed)?;
            let signal = signal_series(&data.tweets, cfg.signal_channel, cfg.invert_ratio)?;
            let target = aggregate_transactions(&data.transactions)?;
            Ok((pair_brands(signal, target)?, Some(data.manifest)))
        }
    }
}

/// Events of one normalized series, with ids local to the series.
pub fn series_events(
    series: &DailySeries,
    detector: &DetectorConfig,
    extraction: &EventExtractionConfig,
) -> Result<(DailySeries, Vec<EventRecord>)> {
    let z = zscore(series)?;
    let mask = detect(&z, detector)?;
    let events = assemble_events(&z, &mask, extraction)?;
    let records = events
        .iter()
        .map(|e| EventRecord::new(e, &z))
        .collect::<Result<Vec<_>>>()?;
    Ok((z, records))
}

/// Signal and target events of all brands. Brands run in parallel; ids are
/// then numbered in brand order, signal events before target events.
pub fn extract_all(
    brands: &[BrandSeries],
    detector: &DetectorConfig,
    extraction: &EventExtractionConfig,
) -> Result<(Vec<EventRecord>, Vec<EventRecord>)> {
    let per_brand: Vec<(Vec<EventRecord>, Vec<EventRecord>)> = brands
        .par_iter()
        .map(|b| {
            let (_, s) = series_events(&b.signal, detector, extraction)?;
            let (_, t) = series_events(&b.target, detector, extraction)?;
            Ok((s, t))
        })
        .collect::<Result<_>>()?;
    let mut next = 0u32;
    let mut signal = Vec::new();
    let mut target = Vec::new();
    for (s, t) in per_brand {
        for (list, out) in [(s, &mut signal), (t, &mut target)] {
            for mut r in list {
                r.id = next;
                next += 1;
                out.push(r);
            }
        }
    }
    Ok((signal, target))
}

/// Cluster signal events by shape and label the records. Events too short
/// for the chosen features stay unlabelled.
pub fn cluster_records(records: &mut [EventRecord], cfg: &ClusteringConfig) -> Result<ClusterModel> {
    let lengths: Vec<usize> = records.iter().map(|r| r.len()).collect();
    let basis = ShapeBasis::for_pool(cfg.distance, &lengths).ok_or_else(|| {
        Error::Data("no signal event is long enough to cluster".into())
    })?;
    let usable = |r: &EventRecord| !matches!(basis, ShapeBasis::Slopes { .. }) || r.len() >= 2;
    let shapes = records
        .iter()
        .filter(|r| usable(r))
        .map(|r| basis.shape(r.id, &r.values))
        .collect::<eventlag_core::Result<Vec<_>>>()?;
    let skipped = records.len() - shapes.len();
    if skipped > 0 {
        log::warn!("{skipped} signal events too short to cluster");
    }
    let mut model = kmeans(&shapes, cfg.k, cfg.distance, cfg.seed)?;
    model.basis = Some(basis);
    let labels: BTreeMap<u32, usize> = model.assignments.iter().map(|a| (a.event, a.cluster)).collect();
    for r in records.iter_mut() {
        r.cluster = labels.get(&r.id).copied();
    }
    Ok(model)
}

/// Group event records by brand for the significance test.
pub fn brand_events(signal: &[EventRecord], target: &[EventRecord]) -> Result<Vec<BrandEvents>> {
    let mut map: BTreeMap<&str, (usize, chrono::NaiveDate, BrandEvents)> = BTreeMap::new();
    for (is_signal, r) in signal.iter().map(|r| (true, r)).chain(target.iter().map(|r| (false, r))) {
        let entry = map.entry(&r.brand).or_insert_with(|| {
            (
                r.series_days,
                r.series_start,
                BrandEvents {
                    brand: r.brand.clone(),
                    days: r.series_days,
                    signal: Vec::new(),
                    target: Vec::new(),
                },
            )
        });
        if entry.0 != r.series_days || entry.1 != r.series_start {
            return Err(Error::Data(format!(
                "{}: events come from series with different date ranges",
                r.brand
            )));
        }
        if is_signal {
            entry.2.signal.push(r.span());
        } else {
            entry.2.target.push(r.span());
        }
    }
    Ok(map.into_values().map(|e| e.2).collect())
}

/// Highest cluster label among the records, if any is labelled.
pub fn cluster_count(signal: &[EventRecord]) -> Option<usize> {
    signal.iter().filter_map(|r| r.cluster).max()
}

/// Write the significance report files into `out`.
pub fn write_significance(out: &mut OutputDir, report: &SignificanceReport, dump_runs: bool) -> Result<()> {
    out.write_json("significance.json", report)?;
    out.write("match_table.csv", &report::match_table_csv(&report.empirical_matches))?;
    for label in &report.labels {
        let name = label.label.to_string();
        out.write(format!("curves/{name}.csv"), &report::curve_csv(label))?;
        if dump_runs {
            out.write(format!("runs/{name}.csv"), &report::runs_csv(label))?;
        }
    }
    out.write("tables/success.md", &report::success_table(report))?;
    if report.labels.iter().any(|l| matches!(l.label, CurveLabel::Cluster(_))) {
        out.write("tables/cluster_frequencies.md", &report::frequency_tables(report))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub brands: usize,
    pub signal_events: usize,
    pub target_events: usize,
    pub files: Vec<PathBuf>,
}

/// Failure of one pipeline stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

/// Run every stage and write the outputs under `out_dir`. On failure an
/// `error.json` is written and partial outputs stay in `quarantine/`.
pub fn run_pipeline(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary, StageError> {
    let mut stage = "setup";
    let result = run_stages(cfg, out_dir, &mut stage);
    result.map_err(|error| {
        if let Err(e) = write_error(out_dir, stage, &error) {
            log::error!("could not write error record: {e}");
        }
        StageError { stage, error }
    })
}

fn run_stages(cfg: &RunConfig, out_dir: &Path, stage: &mut &'static str) -> Result<RunSummary> {
    cfg.validate()?;
    let mut out = OutputDir::create(out_dir)?;
    out.write_json("config.json", cfg)?;

    *stage = "ingest";
    let (brands, manifest) = load_inputs(cfg)?;
    if let Some(m) = &manifest {
        out.write_json("manifest.json", m)?;
    }
    log::info!("{} brands loaded", brands.len());

    *stage = "detect";
    let (mut signal, target) = extract_all(&brands, &cfg.detector, &cfg.extraction)?;
    log::info!("{} signal and {} target events", signal.len(), target.len());

    let k = match &cfg.clustering {
        Some(c) => {
            *stage = "cluster";
            let model = cluster_records(&mut signal, c)?;
            out.write_json("model.json", &model)?;
            Some(c.k)
        }
        None => None,
    };
    crate::eventio::write_jsonl(&out.staged_path("events/signal.jsonl")?, &signal)?;
    crate::eventio::write_jsonl(&out.staged_path("events/target.jsonl")?, &target)?;

    *stage = "significance";
    let grouped = brand_events(&signal, &target)?;
    let report = run_significance_parallel(&grouped, k, &cfg.randomization, cfg.horizon)?;

    *stage = "report";
    write_significance(&mut out, &report, cfg.dump_runs)?;
    let files = out.commit()?;
    Ok(RunSummary {
        brands: brands.len(),
        signal_events: signal.len(),
        target_events: target.len(),
        files,
    })
}
