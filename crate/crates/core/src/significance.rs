//! Randomization test for the predictive curves.
//!
//! Each run relocates every brand's target events uniformly at random over
//! that brand's series (same count, same durations, no overlaps), rebuilds
//! the match table and curves, and records them. The report compares the
//! empirical curves and success counts with the distribution over runs.
//!
//! Run `r` draws from a ChaCha8 stream seeded with `seed` on stream `r`, so
//! runs can execute in any order or in parallel and still reduce to the same
//! report.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::predict::{
    cumulative_curve, match_events, successful_events, successful_events_in, Anchor,
    CumulativeCurve, CurveLabel, EventSpan, MatchTable,
};
use crate::stats;
use crate::{Error, Result};

/// Both event lists of one brand on a common day axis of `days` days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrandEvents {
    pub brand: String,
    pub days: usize,
    pub signal: Vec<EventSpan>,
    pub target: Vec<EventSpan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    UniformNonoverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationConfig {
    pub runs: usize,
    pub seed: u64,
    pub placement: Placement,
    /// Also report 2.5% / 97.5% percentile bounds over runs.
    pub percentile: bool,
    /// Windows (days) for successful-event counts and frequency tables.
    pub windows: Vec<u32>,
    pub anchor: Anchor,
}

impl RandomizationConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            runs: 1000,
            seed,
            placement: Placement::UniformNonoverlap,
            percentile: false,
            windows: alloc::vec![7, 21],
            anchor: Anchor::Start,
        }
    }

    pub fn with_runs(mut self, runs: usize) -> Self {
        self.runs = runs;
        self
    }

    pub fn with_percentile(mut self, on: bool) -> Self {
        self.percentile = on;
        self
    }

    pub fn validate(&self, horizon: u32) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::DegenerateCi(self.runs));
        }
        if let Some(w) = self.windows.iter().find(|&&w| w == 0 || w > horizon) {
            return Err(Error::InvalidConfig(alloc::format!(
                "window {w} must lie in 1..={horizon}"
            )));
        }
        Ok(())
    }

    /// RNG for run `run`.
    pub fn run_rng(&self, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run as u64);
        rng
    }
}

/// Relocate `targets` uniformly at random on `0..days` without overlaps.
///
/// The free days are split among the `n + 1` gaps by a uniform weak
/// composition (choose `n` bar positions out of `free + n` slots) and the
/// events are laid down in a uniformly shuffled order. Ids, durations and
/// peak offsets are kept. The result is sorted by start.
pub fn randomize_targets<R: Rng + ?Sized>(
    targets: &[EventSpan],
    days: usize,
    rng: &mut R,
) -> Result<Vec<EventSpan>> {
    let total: usize = targets.iter().map(|t| t.len).sum();
    if total > days {
        return Err(Error::Infeasible { total, len: days });
    }
    let n = targets.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let free = days - total;
    let mut bars = rand::seq::index::sample(rng, free + n, n).into_vec();
    bars.sort_unstable();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut out = Vec::with_capacity(n);
    let mut pos = 0;
    let mut prev_bar: Option<usize> = None;
    for (slot, &bar) in bars.iter().enumerate() {
        // days of slack before the event in this slot
        let gap = match prev_bar {
            None => bar,
            Some(p) => bar - p - 1,
        };
        pos += gap;
        let t = &targets[order[slot]];
        out.push(t.moved_to(pos));
        pos += t.len;
        prev_bar = Some(bar);
    }
    Ok(out)
}

/// Mean with normal-approximation interval, plus optional percentile bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub sd: f64,
    pub low: f64,
    pub high: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub percentile_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub percentile_high: Option<f64>,
}

impl Band {
    pub fn of(xs: &[f64], percentile: bool) -> Self {
        let m = stats::mean_interval(xs);
        let (pl, ph) = if percentile && !xs.is_empty() {
            let s = stats::sorted(xs);
            (
                Some(stats::quantile_sorted(&s, 0.025)),
                Some(stats::quantile_sorted(&s, 0.975)),
            )
        } else {
            (None, None)
        };
        Self {
            mean: m.mean,
            sd: m.sd,
            low: m.low,
            high: m.high,
            percentile_low: pl,
            percentile_high: ph,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    /// Percentile bounds contain `x`; `None` when they were not computed.
    pub fn percentile_contains(&self, x: f64) -> Option<bool> {
        Some(self.percentile_low? <= x && x <= self.percentile_high?)
    }
}

/// Empirical and randomized curves for one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: CurveLabel,
    pub signal_events: usize,
    pub empirical: CumulativeCurve,
    pub randomized_mean: Vec<f64>,
    /// Per distance: mean over runs of empirical minus randomized, with band.
    pub difference: Vec<Band>,
    /// Randomized curve of every run, in run order.
    #[serde(skip)]
    pub run_curves: Vec<Vec<f64>>,
}

impl LabelReport {
    pub fn ci_low(&self) -> Vec<f64> {
        self.difference.iter().map(|b| b.low).collect()
    }

    pub fn ci_high(&self) -> Vec<f64> {
        self.difference.iter().map(|b| b.high).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub window: u32,
    pub empirical: usize,
    pub randomized: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCell {
    pub cluster: usize,
    pub signal_events: usize,
    pub observed_successes: usize,
    pub observed_pct: f64,
    /// Share of all signal events in this cluster, successful or not.
    pub overall_pct: f64,
    pub randomized_pct: Band,
}

/// Share of successful signal events per cluster for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub window: u32,
    pub observed_successes: usize,
    /// No empirical successes, so observed shares are all zero.
    pub degenerate: bool,
    /// Runs with at least one success; only these enter the randomized band.
    pub runs_used: usize,
    pub cells: Vec<FrequencyCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub runs: usize,
    pub seed: u64,
    pub horizon: u32,
    pub anchor: Anchor,
    pub percentile: bool,
    pub signal_events: usize,
    pub target_events: usize,
    pub labels: Vec<LabelReport>,
    pub success: Vec<SuccessRow>,
    pub cluster_frequencies: Vec<FrequencyTable>,
    pub empirical_matches: MatchTable,
}

impl SignificanceReport {
    pub fn label(&self, label: CurveLabel) -> Option<&LabelReport> {
        self.labels.iter().find(|l| l.label == label)
    }

    pub fn aggregated(&self) -> &LabelReport {
        &self.labels[0]
    }
}

/// What one randomized run contributes to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// One curve per label, in label order.
    pub curves: Vec<Vec<f64>>,
    /// Aggregated success count per window.
    pub successes: Vec<usize>,
    /// `[window][cluster - 1]` success counts.
    pub cluster_successes: Vec<Vec<usize>>,
}

/// Validated inputs and the empirical side of the test. Runs are evaluated
/// independently with [`SignificancePlan::run`] and reduced with
/// [`SignificancePlan::finish`].
#[derive(Debug)]
pub struct SignificancePlan<'a> {
    brands: &'a [BrandEvents],
    cfg: &'a RandomizationConfig,
    horizon: u32,
    clusters: Option<usize>,
    labels: Vec<CurveLabel>,
    empirical: MatchTable,
}

impl<'a> SignificancePlan<'a> {
    /// `clusters` is the number of signal-event clusters, when signal events
    /// carry cluster labels `1..=k`. Unlabelled signal events only enter the
    /// aggregated view.
    pub fn new(
        brands: &'a [BrandEvents],
        clusters: Option<usize>,
        cfg: &'a RandomizationConfig,
        horizon: u32,
    ) -> Result<Self> {
        cfg.validate(horizon)?;
        let mut signal_ids = BTreeSet::new();
        let mut target_ids = BTreeSet::new();
        for b in brands {
            for (set, events) in [(&mut signal_ids, &b.signal), (&mut target_ids, &b.target)] {
                for e in events {
                    if !set.insert(e.id) {
                        return Err(Error::DuplicateEventId(e.id));
                    }
                    if e.len == 0 || e.peak < e.start || e.peak > e.end() {
                        return Err(Error::InvalidConfig(alloc::format!(
                            "event {} has its peak outside its span",
                            e.id
                        )));
                    }
                    if e.end() >= b.days {
                        return Err(Error::IndexOutOfRange {
                            index: e.end(),
                            len: b.days,
                        });
                    }
                }
            }
            if let Some(k) = clusters {
                if let Some(e) = b
                    .signal
                    .iter()
                    .find(|e| e.cluster.is_some_and(|c| !(1..=k).contains(&c)))
                {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "signal event {} has a cluster outside 1..={k}",
                        e.id
                    )));
                }
            }
        }
        let mut tables = Vec::with_capacity(brands.len());
        for b in brands {
            tables.push(match_events(&b.signal, &b.target, horizon, cfg.anchor)?);
            let total: usize = b.target.iter().map(|t| t.len).sum();
            if total > b.days {
                return Err(Error::Infeasible {
                    total,
                    len: b.days,
                });
            }
        }
        let empirical = MatchTable::concat(horizon, tables);
        let mut labels = alloc::vec![CurveLabel::Aggregated];
        labels.extend((1..=clusters.unwrap_or(0)).map(CurveLabel::Cluster));
        Ok(Self {
            brands,
            cfg,
            horizon,
            clusters,
            labels,
            empirical,
        })
    }

    pub fn runs(&self) -> usize {
        self.cfg.runs
    }

    pub fn empirical(&self) -> &MatchTable {
        &self.empirical
    }

    fn outcome(&self, table: &MatchTable) -> RunOutcome {
        let curves = self
            .labels
            .iter()
            .map(|l| {
                let c = match l {
                    CurveLabel::Aggregated => None,
                    CurveLabel::Cluster(c) => Some(*c),
                };
                cumulative_curve(table, c).probabilities
            })
            .collect();
        let k = self.clusters.unwrap_or(0);
        RunOutcome {
            curves,
            successes: self
                .cfg
                .windows
                .iter()
                .map(|&w| successful_events(table, w))
                .collect(),
            cluster_successes: self
                .cfg
                .windows
                .iter()
                .map(|&w| (1..=k).map(|c| successful_events_in(table, w, c)).collect())
                .collect(),
        }
    }

    /// Randomized run number `run`.
    pub fn run(&self, run: usize) -> Result<RunOutcome> {
        let mut rng = self.cfg.run_rng(run);
        let mut tables = Vec::with_capacity(self.brands.len());
        for b in self.brands {
            let moved = randomize_targets(&b.target, b.days, &mut rng)?;
            tables.push(match_events(&b.signal, &moved, self.horizon, self.cfg.anchor)?);
        }
        Ok(self.outcome(&MatchTable::concat(self.horizon, tables)))
    }

    /// Reduce run outcomes, given in run order, into the report.
    pub fn finish(self, runs: Vec<RunOutcome>) -> Result<SignificanceReport> {
        if runs.len() < 2 {
            return Err(Error::DegenerateCi(runs.len()));
        }
        let pct = self.cfg.percentile;
        let observed = self.outcome(&self.empirical);
        let horizon = self.horizon as usize;

        let labels = self
            .labels
            .iter()
            .enumerate()
            .map(|(li, &label)| {
                let empirical = cumulative_curve(
                    &self.empirical,
                    match label {
                        CurveLabel::Aggregated => None,
                        CurveLabel::Cluster(c) => Some(c),
                    },
                );
                let run_curves: Vec<Vec<f64>> =
                    runs.iter().map(|r| r.curves[li].clone()).collect();
                let mut randomized_mean = Vec::with_capacity(horizon);
                let mut difference = Vec::with_capacity(horizon);
                for d in 0..horizon {
                    let at: Vec<f64> = run_curves.iter().map(|c| c[d]).collect();
                    randomized_mean.push(stats::mean(&at));
                    let diffs: Vec<f64> =
                        at.iter().map(|r| empirical.probabilities[d] - r).collect();
                    difference.push(Band::of(&diffs, pct));
                }
                let signal_events = match label {
                    CurveLabel::Aggregated => self.empirical.rows.len(),
                    CurveLabel::Cluster(c) => self
                        .empirical
                        .rows
                        .iter()
                        .filter(|r| r.cluster == Some(c))
                        .count(),
                };
                LabelReport {
                    label,
                    signal_events,
                    empirical,
                    randomized_mean,
                    difference,
                    run_curves,
                }
            })
            .collect();

        let success = self
            .cfg
            .windows
            .iter()
            .enumerate()
            .map(|(wi, &window)| {
                let counts: Vec<f64> = runs.iter().map(|r| r.successes[wi] as f64).collect();
                SuccessRow {
                    window,
                    empirical: observed.successes[wi],
                    randomized: Band::of(&counts, pct),
                }
            })
            .collect();

        let k = self.clusters.unwrap_or(0);
        let cluster_frequencies = if k == 0 {
            Vec::new()
        } else {
            let sizes: Vec<usize> = (1..=k)
                .map(|c| {
                    self.empirical
                        .rows
                        .iter()
                        .filter(|r| r.cluster == Some(c))
                        .count()
                })
                .collect();
            let all = self.empirical.rows.len();
            self.cfg
                .windows
                .iter()
                .enumerate()
                .map(|(wi, &window)| {
                    let obs = &observed.cluster_successes[wi];
                    let total: usize = obs.iter().sum();
                    let used: Vec<&Vec<usize>> = runs
                        .iter()
                        .map(|r| &r.cluster_successes[wi])
                        .filter(|cs| cs.iter().sum::<usize>() > 0)
                        .collect();
                    let cells = (0..k)
                        .map(|ci| {
                            let shares: Vec<f64> = used
                                .iter()
                                .map(|cs| {
                                    100.0 * cs[ci] as f64 / cs.iter().sum::<usize>() as f64
                                })
                                .collect();
                            FrequencyCell {
                                cluster: ci + 1,
                                signal_events: sizes[ci],
                                observed_successes: obs[ci],
                                observed_pct: share(obs[ci], total),
                                overall_pct: share(sizes[ci], all),
                                randomized_pct: Band::of(&shares, pct),
                            }
                        })
                        .collect();
                    FrequencyTable {
                        window,
                        observed_successes: total,
                        degenerate: total == 0,
                        runs_used: used.len(),
                        cells,
                    }
                })
                .collect()
        };

        Ok(SignificanceReport {
            runs: runs.len(),
            seed: self.cfg.seed,
            horizon: self.horizon,
            anchor: self.cfg.anchor,
            percentile: pct,
            signal_events: self.empirical.rows.len(),
            target_events: self.brands.iter().map(|b| b.target.len()).sum(),
            labels,
            success,
            cluster_frequencies,
            empirical_matches: self.empirical,
        })
    }
}

fn share(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Run the whole test sequentially.
pub fn run_significance(
    brands: &[BrandEvents],
    clusters: Option<usize>,
    cfg: &RandomizationConfig,
    horizon: u32,
) -> Result<SignificanceReport> {
    let plan = SignificancePlan::new(brands, clusters, cfg, horizon)?;
    let runs = (0..plan.runs())
        .map(|r| plan.run(r))
        .collect::<Result<Vec<_>>>()?;
    plan.finish(runs)
}
