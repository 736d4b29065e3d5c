//! Assembly of flagged spike days into events.
//!
//! Spikes on consecutive days form one event whose peak is the highest day.
//! From the peak the growth is traced leftward while values keep falling.
//! Where the descent stalls at a local minimum that is still above the series
//! median, up to `lookahead` further days are inspected. A lower value among
//! them annexes everything in between and the descent resumes with a fresh
//! lookahead budget. The relaxation is traced the same way to the right.
//! Neither side may reach further than `max_dist` days from the peak.
//!
//! A few situations need resolving beyond that description:
//!
//! * An extension that reaches another event's spikes merges the two events,
//!   provided the merged spikes still fit within `max_dist` of the merged
//!   peak; otherwise those spikes act as a barrier for the extension.
//! * Annexed days higher than the current peak move the peak there and the
//!   extraction is repeated from the new peak. A day that could not become
//!   the peak without pushing the event's own spikes beyond `max_dist` is
//!   not annexed.
//! * Non-spike days claimed by several events go to the event whose peak is
//!   nearest, ties to the earlier event; each event keeps the contiguous run
//!   around its own spikes.
//! * A single run of consecutive spikes too long to fit around its peak is
//!   cut into pieces that each fit.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::detect::SpikeMask;
use crate::series::{Channel, DailySeries};
use crate::{stats, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Median of the whole (normalized) series.
    SeriesMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventExtractionConfig {
    /// Farthest a growth or relaxation may reach from the peak, in days.
    pub max_dist: usize,
    /// Days inspected past a local minimum before the descent gives up.
    pub lookahead: usize,
    pub baseline: Baseline,
}

impl Default for EventExtractionConfig {
    fn default() -> Self {
        Self {
            max_dist: 14,
            lookahead: 3,
            baseline: Baseline::SeriesMedian,
        }
    }
}

impl EventExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_dist == 0 || self.lookahead == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "max_dist and lookahead must be positive (got {} and {})",
                self.max_dist,
                self.lookahead
            )));
        }
        Ok(())
    }
}

/// One detected event: growth days, the peak day and relaxation days form a
/// contiguous run of day indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSignature {
    pub id: u32,
    pub brand_id: String,
    pub channel: Channel,
    pub peak_index: usize,
    pub peak_value: f64,
    pub growth: Vec<usize>,
    pub relaxation: Vec<usize>,
    /// Flagged days merged into this event.
    pub member_spikes: Vec<usize>,
}

impl EventSignature {
    pub fn start(&self) -> usize {
        self.growth.first().copied().unwrap_or(self.peak_index)
    }

    /// Last day index (inclusive).
    pub fn end(&self) -> usize {
        self.relaxation.last().copied().unwrap_or(self.peak_index)
    }

    pub fn len(&self) -> usize {
        self.end() - self.start() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> RangeInclusive<usize> {
        self.start()..=self.end()
    }
}

/// Group events' extents into the final list of signatures.
pub fn assemble_events(
    series: &DailySeries,
    mask: &SpikeMask,
    cfg: &EventExtractionConfig,
) -> Result<Vec<EventSignature>> {
    if mask.len() != series.len() {
        return Err(Error::LengthMismatch {
            left: series.len(),
            right: mask.len(),
        });
    }
    let extents = extract_extents(series.values(), &mask.flags, cfg)?;
    Ok(extents
        .into_iter()
        .enumerate()
        .map(|(i, e)| EventSignature {
            id: i as u32,
            brand_id: series.brand_id().into(),
            channel: series.channel(),
            peak_index: e.peak,
            peak_value: series.values()[e.peak],
            growth: (e.lo..e.peak).collect(),
            relaxation: (e.peak + 1..=e.hi).collect(),
            member_spikes: e.members,
        })
        .collect())
}

/// Index-level result of event extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extent {
    pub lo: usize,
    pub hi: usize,
    pub peak: usize,
    pub members: Vec<usize>,
}

/// Core of [`assemble_events`] over bare slices; extents come back sorted.
pub fn extract_extents(
    values: &[f64],
    flags: &[bool],
    cfg: &EventExtractionConfig,
) -> Result<Vec<Extent>> {
    cfg.validate()?;
    if values.len() != flags.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: flags.len(),
        });
    }
    if !flags.iter().any(|&f| f) {
        return Ok(Vec::new());
    }
    let median = match cfg.baseline {
        Baseline::SeriesMedian => stats::median(values),
    };
    let ctx = Ctx {
        values,
        median,
        max_dist: cfg.max_dist,
        lookahead: cfg.lookahead,
    };
    let mut groups: Vec<Group> = initial_runs(values, flags, cfg.max_dist)
        .into_iter()
        .map(|(lo, hi)| Group::new((lo..=hi).collect()))
        .collect();

    let claimed = loop {
        let owner = owners(values.len(), &groups);
        match ctx.step(&mut groups, &owner) {
            Step::Changed => continue,
            Step::Stable(claimed) => break claimed,
        }
    };
    Ok(resolve_collisions(values, &groups, claimed))
}

struct Ctx<'a> {
    values: &'a [f64],
    median: f64,
    max_dist: usize,
    lookahead: usize,
}

#[derive(Debug, Clone)]
struct Group {
    members: Vec<usize>,
    /// Indices of other groups this one may not merge with.
    blocked: BTreeSet<usize>,
}

impl Group {
    fn new(members: Vec<usize>) -> Self {
        Self {
            members,
            blocked: BTreeSet::new(),
        }
    }

    fn span(&self) -> (usize, usize) {
        (self.members[0], *self.members.last().unwrap())
    }
}

/// Claimed range and working peak of one group.
#[derive(Debug, Clone, Copy)]
struct Claim {
    lo: usize,
    hi: usize,
    peak: usize,
}

enum Step {
    Changed,
    Stable(Vec<Claim>),
}

fn argmax(values: &[f64], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..=hi {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

fn fits(span: (usize, usize), peak: usize, max_dist: usize) -> bool {
    span.0 + max_dist >= peak && span.1 <= peak + max_dist
}

/// Maximal runs of consecutive flags, cut so that each run fits within
/// `max_dist` of its own highest day.
fn initial_runs(values: &[f64], flags: &[bool], max_dist: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < flags.len() {
        if !flags[i] {
            i += 1;
            continue;
        }
        let lo = i;
        while i + 1 < flags.len() && flags[i + 1] {
            i += 1;
        }
        split_run(values, lo, i, max_dist, &mut runs);
        i += 1;
    }
    runs.sort_unstable();
    runs
}

fn split_run(values: &[f64], lo: usize, hi: usize, max_dist: usize, out: &mut Vec<(usize, usize)>) {
    let q = argmax(values, lo, hi);
    let a = lo.max(q.saturating_sub(max_dist));
    let b = hi.min(q + max_dist);
    out.push((a, b));
    if a > lo {
        split_run(values, lo, a - 1, max_dist, out);
    }
    if b < hi {
        split_run(values, b + 1, hi, max_dist, out);
    }
}

fn owners(n: usize, groups: &[Group]) -> Vec<Option<usize>> {
    let mut owner = alloc::vec![None; n];
    for (g, group) in groups.iter().enumerate() {
        for &m in &group.members {
            owner[m] = Some(g);
        }
    }
    owner
}

impl Ctx<'_> {
    /// One pass of the merge fixpoint: compute every group's claim and react
    /// to the first foreign spike found inside a claim.
    fn step(&self, groups: &mut Vec<Group>, owner: &[Option<usize>]) -> Step {
        let mut claims = Vec::with_capacity(groups.len());
        for g in 0..groups.len() {
            let barrier: BTreeSet<usize> = groups[g]
                .blocked
                .iter()
                .flat_map(|&h| groups[h].members.iter().copied())
                .collect();
            let claim = self.claim(&groups[g], &barrier);
            // Merging only with the nearest foreign group keeps group spans
            // disjoint, so a blocked group always lies entirely beyond a wall.
            let (a, b) = groups[g].span();
            let left = (claim.lo..a).rev().find_map(|i| owner[i].map(|h| (a - i, h)));
            let right = (b + 1..=claim.hi).find_map(|i| owner[i].map(|h| (i - b, h)));
            let foreign = match (left, right) {
                (Some(l), Some(r)) => Some(if r.0 < l.0 { r.1 } else { l.1 }),
                (l, r) => l.or(r).map(|x| x.1),
            };
            if let Some(h) = foreign {
                let mut merged: Vec<usize> = groups[g]
                    .members
                    .iter()
                    .chain(groups[h].members.iter())
                    .copied()
                    .collect();
                merged.sort_unstable();
                let span = (merged[0], *merged.last().unwrap());
                let peak = argmax(self.values, span.0, span.1);
                if fits(span, peak, self.max_dist) {
                    let (keep, drop) = (g.min(h), g.max(h));
                    groups[keep].members = merged;
                    groups.remove(drop);
                    // blocked sets refer to positions; rebuild them from scratch
                    for group in groups.iter_mut() {
                        group.blocked.clear();
                    }
                } else {
                    groups[g].blocked.insert(h);
                }
                return Step::Changed;
            }
            claims.push(claim);
        }
        Step::Stable(claims)
    }

    fn claim(&self, group: &Group, barrier: &BTreeSet<usize>) -> Claim {
        let span = group.span();
        let mut peak = argmax(self.values, span.0, span.1);
        loop {
            let left_wall = barrier
                .range(..span.0.min(peak))
                .next_back()
                .map_or(0, |&b| b + 1);
            let right_wall = barrier
                .range(span.1.max(peak) + 1..)
                .next()
                .map_or(self.values.len() - 1, |&b| b - 1);
            let left_limit = peak.saturating_sub(self.max_dist).max(left_wall);
            let right_limit = (peak + self.max_dist).min(right_wall);
            let l = self.descend(peak, Side::Left, left_limit, span);
            let r = self.descend(peak, Side::Right, right_limit, span);
            let lo = l.min(span.0);
            let hi = r.max(span.1);
            let q = argmax(self.values, lo, hi);
            if self.values[q] > self.values[peak] {
                peak = q;
            } else {
                return Claim { lo, hi, peak };
            }
        }
    }

    /// Walk away from `peak` while values fall, extending past shallow minima
    /// above the median via the lookahead. Returns the outermost index reached.
    fn descend(&self, peak: usize, side: Side, limit: usize, span: (usize, usize)) -> usize {
        let v = self.values;
        let next = |i: usize| -> Option<usize> {
            match side {
                Side::Left => (i > limit).then(|| i - 1),
                Side::Right => (i < limit).then(|| i + 1),
            }
        };
        let mut cur = peak;
        loop {
            while let Some(n) = next(cur) {
                if v[n] < v[cur] {
                    cur = n;
                } else {
                    break;
                }
            }
            if v[cur] <= self.median {
                return cur;
            }
            let mut probe = cur;
            let mut lower = None;
            for _ in 0..self.lookahead {
                match next(probe) {
                    Some(n) => probe = n,
                    None => break,
                }
                if v[probe] < v[cur] {
                    lower = Some(probe);
                    break;
                }
            }
            let Some(j) = lower else {
                return cur;
            };
            let (a, b) = if j < cur { (j, cur) } else { (cur, j) };
            let blocked = (a..=b).any(|i| v[i] > v[peak] && !fits(span, i, self.max_dist));
            if blocked {
                return cur;
            }
            cur = j;
        }
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

fn resolve_collisions(values: &[f64], groups: &[Group], claims: Vec<Claim>) -> Vec<Extent> {
    let n = values.len();
    // claimants ordered by start, then peak, so "earlier" is well defined
    let mut order: Vec<usize> = (0..claims.len()).collect();
    order.sort_by_key(|&g| (claims[g].lo, claims[g].peak));
    let rank: Vec<usize> = {
        let mut r = alloc::vec![0; claims.len()];
        for (pos, &g) in order.iter().enumerate() {
            r[g] = pos;
        }
        r
    };

    let mut winner: Vec<Option<usize>> = alloc::vec![None; n];
    for (g, c) in claims.iter().enumerate() {
        for i in c.lo..=c.hi {
            let better = match winner[i] {
                None => true,
                Some(w) => {
                    let dg = i.abs_diff(c.peak);
                    let dw = i.abs_diff(claims[w].peak);
                    dg < dw || (dg == dw && rank[g] < rank[w])
                }
            };
            if better {
                winner[i] = Some(g);
            }
        }
    }
    // spike days and the days between a group's own spikes are never contested
    for (g, group) in groups.iter().enumerate() {
        let (a, b) = group.span();
        for w in winner.iter_mut().take(b + 1).skip(a) {
            *w = Some(g);
        }
    }

    let mut out: Vec<Extent> = order
        .iter()
        .map(|&g| {
            let (a, b) = groups[g].span();
            let mut lo = a;
            while lo > 0 && winner[lo - 1] == Some(g) {
                lo -= 1;
            }
            let mut hi = b;
            while hi + 1 < n && winner[hi + 1] == Some(g) {
                hi += 1;
            }
            let peak = if (lo..=hi).contains(&claims[g].peak) {
                claims[g].peak
            } else {
                argmax(values, lo, hi)
            };
            Extent {
                lo,
                hi,
                peak,
                members: groups[g].members.clone(),
            }
        })
        .collect();
    out.sort_by_key(|e| e.lo);
    out
}

/// `(offset, value)` pairs covering an event, offsets from its first day.
pub fn event_series(event: &EventSignature, source: &DailySeries) -> Result<Vec<(usize, f64)>> {
    if event.brand_id != source.brand_id() || event.channel != source.channel() {
        return Err(Error::SeriesMismatch {
            event: alloc::format!("{}/{}", event.brand_id, event.channel),
            series: alloc::format!("{}/{}", source.brand_id(), source.channel()),
        });
    }
    if event.end() >= source.len() {
        return Err(Error::IndexOutOfRange {
            index: event.end(),
            len: source.len(),
        });
    }
    let start = event.start();
    Ok(event
        .indices()
        .map(|i| (i - start, source.values()[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use chrono::NaiveDate;

    fn series(values: Vec<f64>) -> DailySeries {
        DailySeries::new(
            "acme",
            Channel::Signal,
            NaiveDate::from_ymd_opt(2014, 3, 3).unwrap(),
            values,
        )
        .unwrap()
    }

    fn mask(n: usize, flagged: &[usize]) -> SpikeMask {
        let mut flags = vec![false; n];
        for &i in flagged {
            flags[i] = true;
        }
        SpikeMask::from_flags(flags)
    }

    fn run(values: Vec<f64>, flagged: &[usize], cfg: EventExtractionConfig) -> Vec<EventSignature> {
        let s = series(values);
        assemble_events(&s, &mask(s.len(), flagged), &cfg).unwrap()
    }

    #[test]
    fn empty_mask_gives_no_events() {
        assert!(run(vec![0.0, 1.0, 2.0], &[], Default::default()).is_empty());
    }

    #[test]
    fn adjacent_spikes_merge() {
        let mut v = vec![0.0; 20];
        v[10] = 2.0;
        v[11] = 3.0;
        let ev = run(v, &[10, 11], Default::default());
        assert_eq!(ev.len(), 1);
        let e = &ev[0];
        assert_eq!(e.peak_index, 11);
        assert_eq!(e.growth, vec![9, 10]);
        assert_eq!(e.relaxation, vec![12]);
        assert_eq!(e.member_spikes, vec![10, 11]);
    }

    #[test]
    fn ramp_signature() {
        let v = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.0];
        let ev = run(v.clone(), &[5], Default::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].growth, vec![0, 1, 2, 3, 4]);
        assert_eq!(ev[0].relaxation, vec![6, 7, 8, 9, 10]);

        let short = EventExtractionConfig {
            max_dist: 3,
            ..Default::default()
        };
        let ev = run(v, &[5], short);
        assert_eq!(ev[0].growth, vec![2, 3, 4]);
        assert_eq!(ev[0].relaxation, vec![6, 7, 8]);
    }

    #[test]
    fn lookahead_annexes_valley() {
        let mut v = vec![0.0; 30];
        for (i, x) in [(10, 1.0), (11, 2.0), (12, 5.0), (13, 3.0), (14, 4.0), (15, 6.0), (16, 2.0), (17, 1.0)] {
            v[i] = x;
        }
        let ev = run(v, &[12, 15], Default::default());
        assert_eq!(ev.len(), 1);
        let e = &ev[0];
        assert_eq!(e.peak_index, 15);
        assert_eq!(e.growth, (9..15).collect::<Vec<_>>());
        assert_eq!(e.relaxation, vec![16, 17, 18]);
        assert_eq!(e.member_spikes, vec![12, 15]);
    }

    #[test]
    fn lookahead_stops_at_or_below_median() {
        // the shallow minimum at index 13 equals the median, so no lookahead
        let mut v = vec![0.0; 30];
        for (i, x) in [(12, 5.0), (14, 4.0), (15, 6.0)] {
            v[i] = x;
        }
        let ev = run(v, &[12, 15], Default::default());
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].start(), ev[0].end()), (11, 13));
        assert_eq!((ev[1].start(), ev[1].end()), (14, 16));
    }

    #[test]
    fn shared_minimum_goes_to_nearer_peak() {
        let mut v = vec![0.0; 16];
        for (i, x) in [(5, 3.0), (6, 1.0), (8, 4.0)] {
            v[i] = x;
        }
        let ev = run(v, &[5, 8], Default::default());
        assert_eq!(ev.len(), 2);
        // day 7 is one day from peak 8 and two from peak 5
        assert_eq!((ev[0].start(), ev[0].end()), (4, 6));
        assert_eq!((ev[1].start(), ev[1].end()), (7, 9));
    }

    #[test]
    fn shared_minimum_tie_goes_to_earlier_event() {
        let mut v = vec![0.0; 16];
        for (i, x) in [(5, 3.0), (6, 1.0), (8, 2.0), (9, 4.0)] {
            v[i] = x;
        }
        let ev = run(v, &[5, 9], Default::default());
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].start(), ev[0].end()), (4, 7));
        assert_eq!((ev[1].start(), ev[1].end()), (8, 10));
    }

    #[test]
    fn long_run_is_cut_to_fit() {
        let v: Vec<f64> = (0..40).map(|i| if i == 20 { 9.0 } else { 1.0 + (i % 2) as f64 }).collect();
        let flagged: Vec<usize> = (0..40).collect();
        let cfg = EventExtractionConfig {
            max_dist: 5,
            ..Default::default()
        };
        let ev = run(v, &flagged, cfg);
        let covered: usize = ev.iter().map(|e| e.member_spikes.len()).sum();
        assert_eq!(covered, 40);
        for e in &ev {
            assert!(e.len() <= 11);
            assert!(e.start() + 5 >= e.peak_index && e.end() <= e.peak_index + 5);
        }
    }

    #[test]
    fn event_series_offsets() {
        let mut v = vec![0.0; 10];
        v[5] = 3.1;
        let s = series(v);
        let e = EventSignature {
            id: 0,
            brand_id: "acme".into(),
            channel: Channel::Signal,
            peak_index: 5,
            peak_value: 3.1,
            growth: vec![],
            relaxation: vec![],
            member_spikes: vec![5],
        };
        assert_eq!(event_series(&e, &s).unwrap(), vec![(0, 3.1)]);

        let ramp = series(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 4.0, 3.0, 2.0, 1.0, 0.0]);
        let ev = assemble_events(&ramp, &mask(11, &[5]), &Default::default()).unwrap();
        let pts = event_series(&ev[0], &ramp).unwrap();
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[5], (5, 5.0));

        let short = series(vec![0.0; 4]);
        assert!(matches!(
            event_series(&e, &short),
            Err(Error::IndexOutOfRange { index: 5, len: 4 })
        ));
    }
}
