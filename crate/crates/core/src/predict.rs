//! Predictive power of signal events for target events.
//!
//! Every signal event is matched to the first target event that starts on or
//! after its own start. Signal events sharing a target split one unit of
//! weight between them in inverse proportion to their distance, so a burst of
//! signal events ahead of a single target counts once. The cumulative curve
//! `P(d)` is the weighted matched mass at distance `<= d` divided by the
//! effective number of events: distinct matched targets plus unmatched
//! signal events.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::events::EventSignature;
use crate::{Error, Result};

/// Position of an event on its series' day axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpan {
    pub id: u32,
    pub start: usize,
    pub len: usize,
    /// Absolute day index of the peak.
    pub peak: usize,
    pub cluster: Option<usize>,
}

impl EventSpan {
    pub fn new(id: u32, start: usize, len: usize, peak: usize) -> Self {
        Self {
            id,
            start,
            len,
            peak,
            cluster: None,
        }
    }

    pub fn of(event: &EventSignature) -> Self {
        Self::new(event.id, event.start(), event.len(), event.peak_index)
    }

    pub fn with_cluster(mut self, cluster: Option<usize>) -> Self {
        self.cluster = cluster;
        self
    }

    /// Last day (inclusive).
    pub fn end(&self) -> usize {
        self.start + self.len - 1
    }

    /// The same event moved to begin at `start`.
    pub fn moved_to(&self, start: usize) -> Self {
        Self {
            start,
            peak: start + (self.peak - self.start),
            ..*self
        }
    }

    fn anchor(&self, anchor: Anchor) -> usize {
        match anchor {
            Anchor::Start => self.start,
            Anchor::Peak => self.peak,
        }
    }
}

/// Which day of an event distances are measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    #[default]
    Start,
    Peak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub signal_event: u32,
    pub cluster: Option<usize>,
    pub target_event: Option<u32>,
    /// Days from signal anchor to target anchor, at least 1.
    pub distance: Option<u32>,
    /// Share of the target group's unit weight; 1 for unmatched rows.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTable {
    pub horizon: u32,
    pub rows: Vec<MatchRow>,
}

fn check_overlap(events: &[EventSpan]) -> Result<Vec<EventSpan>> {
    let mut sorted = events.to_vec();
    sorted.sort_by_key(|e| (e.start, e.id));
    for w in sorted.windows(2) {
        if w[1].start <= w[0].end() {
            return Err(Error::OverlapViolation {
                first: w[0].id,
                second: w[1].id,
            });
        }
    }
    Ok(sorted)
}

/// Match each signal event of one brand to its first following target event
/// within `horizon` days. Same-day starts count as distance 1.
pub fn match_events(
    signal: &[EventSpan],
    target: &[EventSpan],
    horizon: u32,
    anchor: Anchor,
) -> Result<MatchTable> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least one day".into()));
    }
    let signal = check_overlap(signal)?;
    let mut target = check_overlap(target)?;
    target.sort_by_key(|t| (t.anchor(anchor), t.id));

    let rows = signal
        .iter()
        .map(|s| {
            let a = s.anchor(anchor);
            let first = target.partition_point(|t| t.anchor(anchor) < a);
            let hit = target.get(first).and_then(|t| {
                let d = ((t.anchor(anchor) - a) as u64).max(1);
                (d <= u64::from(horizon)).then_some((t.id, d as u32))
            });
            MatchRow {
                signal_event: s.id,
                cluster: s.cluster,
                target_event: hit.map(|h| h.0),
                distance: hit.map(|h| h.1),
                weight: 1.0,
            }
        })
        .collect();
    let mut table = MatchTable { horizon, rows };
    table.reweight();
    Ok(table)
}

impl MatchTable {
    pub fn empty(horizon: u32) -> Self {
        Self {
            horizon,
            rows: Vec::new(),
        }
    }

    /// Append another brand's rows. Event ids must be unique across brands.
    pub fn extend(&mut self, other: MatchTable) {
        self.rows.extend(other.rows);
        self.reweight();
    }

    pub fn concat(horizon: u32, tables: impl IntoIterator<Item = MatchTable>) -> Self {
        let mut rows = Vec::new();
        for t in tables {
            rows.extend(t.rows);
        }
        let mut table = Self { horizon, rows };
        table.reweight();
        table
    }

    /// Recompute inverse-distance weights within each shared-target group.
    pub fn reweight(&mut self) {
        let mut inverse_sums: BTreeMap<u32, f64> = BTreeMap::new();
        for r in &self.rows {
            if let (Some(t), Some(d)) = (r.target_event, r.distance) {
                *inverse_sums.entry(t).or_default() += 1.0 / f64::from(d);
            }
        }
        for r in &mut self.rows {
            r.weight = match (r.target_event, r.distance) {
                (Some(t), Some(d)) => (1.0 / f64::from(d)) / inverse_sums[&t],
                _ => 1.0,
            };
        }
    }

    /// Rows of one cluster, with weights renormalized inside the cluster.
    pub fn for_cluster(&self, cluster: usize) -> Self {
        let mut t = Self {
            horizon: self.horizon,
            rows: self
                .rows
                .iter()
                .filter(|r| r.cluster == Some(cluster))
                .copied()
                .collect(),
        };
        t.reweight();
        t
    }

    pub fn matched_groups(&self) -> usize {
        let mut targets: Vec<u32> = self.rows.iter().filter_map(|r| r.target_event).collect();
        targets.sort_unstable();
        targets.dedup();
        targets.len()
    }

    pub fn unmatched(&self) -> usize {
        self.rows.iter().filter(|r| r.target_event.is_none()).count()
    }

    /// Matched groups plus unmatched rows.
    pub fn effective_total(&self) -> usize {
        self.matched_groups() + self.unmatched()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "id")]
pub enum CurveLabel {
    Aggregated,
    Cluster(usize),
}

impl core::fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CurveLabel::Aggregated => f.write_str("aggregated"),
            CurveLabel::Cluster(c) => write!(f, "cluster-{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurve {
    pub label: CurveLabel,
    /// `probabilities[d - 1]` is `P(d)` for `d = 1..=horizon`.
    pub probabilities: Vec<f64>,
    pub effective_total: f64,
    /// Set when there was nothing to divide by.
    pub degenerate: bool,
}

impl CumulativeCurve {
    pub fn at(&self, distance: u32) -> f64 {
        self.probabilities[distance as usize - 1]
    }
}

/// Cumulative probability of a following target event, overall or for the
/// signal events of one cluster.
pub fn cumulative_curve(table: &MatchTable, cluster: Option<usize>) -> CumulativeCurve {
    let filtered;
    let (table, label) = match cluster {
        Some(c) => {
            filtered = table.for_cluster(c);
            (&filtered, CurveLabel::Cluster(c))
        }
        None => (table, CurveLabel::Aggregated),
    };
    let horizon = table.horizon as usize;
    let total = table.effective_total();
    if total == 0 {
        return CumulativeCurve {
            label,
            probabilities: alloc::vec![0.0; horizon],
            effective_total: 0.0,
            degenerate: true,
        };
    }
    let mut mass = alloc::vec![0.0; horizon];
    for r in &table.rows {
        if let Some(d) = r.distance {
            mass[d as usize - 1] += r.weight;
        }
    }
    let total = total as f64;
    let mut acc = 0.0;
    let probabilities = mass
        .into_iter()
        .map(|m| {
            acc += m;
            // group weights sum to one only up to rounding
            (acc / total).min(1.0)
        })
        .collect();
    CumulativeCurve {
        label,
        probabilities,
        effective_total: total,
        degenerate: false,
    }
}

/// Signal events with a target event at most `window` days later.
pub fn successful_events(table: &MatchTable, window: u32) -> usize {
    table
        .rows
        .iter()
        .filter(|r| r.distance.is_some_and(|d| d <= window))
        .count()
}

/// [`successful_events`] restricted to one cluster.
pub fn successful_events_in(table: &MatchTable, window: u32, cluster: usize) -> usize {
    table
        .rows
        .iter()
        .filter(|r| r.cluster == Some(cluster) && r.distance.is_some_and(|d| d <= window))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn span(id: u32, start: usize, len: usize) -> EventSpan {
        EventSpan::new(id, start, len, start)
    }

    #[test]
    fn single_match_has_unit_weight() {
        let t = match_events(&[span(1, 10, 2)], &[span(100, 13, 4)], 28, Anchor::Start).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].distance, Some(3));
        assert_eq!(t.rows[0].target_event, Some(100));
        assert_eq!(t.rows[0].weight, 1.0);
    }

    #[test]
    fn shared_target_weights() {
        let signal = [span(1, 0, 2), span(2, 2, 1), span(3, 3, 1)];
        let t = match_events(&signal, &[span(100, 4, 3)], 28, Anchor::Start).unwrap();
        let w: Vec<f64> = t.rows.iter().map(|r| r.weight).collect();
        let d: Vec<u32> = t.rows.iter().map(|r| r.distance.unwrap()).collect();
        assert_eq!(d, vec![4, 2, 1]);
        let expect = [0.25 / 1.75, 0.5 / 1.75, 1.0 / 1.75];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_beyond_horizon() {
        let t = match_events(&[span(1, 0, 2)], &[span(100, 40, 3)], 28, Anchor::Start).unwrap();
        assert_eq!(t.rows[0].target_event, None);
        assert_eq!(t.rows[0].weight, 1.0);
        assert_eq!(t.effective_total(), 1);
        let c = cumulative_curve(&t, None);
        assert!(c.probabilities.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn same_day_start_counts_as_one() {
        let t = match_events(&[span(1, 5, 2)], &[span(100, 5, 3)], 28, Anchor::Start).unwrap();
        assert_eq!(t.rows[0].distance, Some(1));
    }

    #[test]
    fn earlier_targets_are_ignored() {
        let t = match_events(&[span(1, 10, 2)], &[span(100, 6, 3), span(101, 20, 1)], 28, Anchor::Start)
            .unwrap();
        assert_eq!(t.rows[0].target_event, Some(101));
        assert_eq!(t.rows[0].distance, Some(10));
    }

    #[test]
    fn peak_anchor() {
        let s = EventSpan::new(1, 0, 6, 4);
        let t = EventSpan::new(100, 2, 8, 9);
        let m = match_events(&[s], &[t], 28, Anchor::Peak).unwrap();
        assert_eq!(m.rows[0].distance, Some(5));
    }

    #[test]
    fn overlapping_inputs_rejected() {
        assert_eq!(
            match_events(&[span(1, 0, 5), span(2, 4, 2)], &[], 28, Anchor::Start),
            Err(Error::OverlapViolation { first: 1, second: 2 })
        );
    }

    #[test]
    fn curve_from_two_independent_matches() {
        let signal = [span(1, 0, 1), span(2, 10, 1)];
        let target = [span(100, 1, 1), span(101, 13, 1)];
        let t = match_events(&signal, &target, 5, Anchor::Start).unwrap();
        let c = cumulative_curve(&t, None);
        assert_eq!(c.probabilities, vec![0.5, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(c.effective_total, 2.0);
    }

    #[test]
    fn saturated_curve() {
        let signal = [span(1, 0, 1), span(2, 10, 1)];
        let target = [span(100, 1, 1), span(101, 11, 1)];
        let c = cumulative_curve(&match_events(&signal, &target, 4, Anchor::Start).unwrap(), None);
        assert_eq!(c.probabilities, vec![1.0; 4]);
    }

    #[test]
    fn empty_table_is_degenerate() {
        let c = cumulative_curve(&MatchTable::empty(7), None);
        assert!(c.degenerate);
        assert_eq!(c.probabilities, vec![0.0; 7]);
    }

    #[test]
    fn cluster_filter_renormalizes() {
        let signal = [
            span(1, 0, 1).with_cluster(Some(1)),
            span(2, 2, 1).with_cluster(Some(2)),
        ];
        let t = match_events(&signal, &[span(100, 4, 1)], 28, Anchor::Start).unwrap();
        assert!(t.rows[0].weight < 0.5);
        let only1 = t.for_cluster(1);
        assert_eq!(only1.rows.len(), 1);
        assert_eq!(only1.rows[0].weight, 1.0);
        let c = cumulative_curve(&t, Some(2));
        assert_eq!(c.label, CurveLabel::Cluster(2));
        assert_eq!(c.at(2), 1.0);
    }

    #[test]
    fn success_counts() {
        let rows = [3, 10, 25]
            .iter()
            .enumerate()
            .map(|(i, &d)| MatchRow {
                signal_event: i as u32,
                cluster: Some(1 + i % 2),
                target_event: Some(100 + i as u32),
                distance: Some(d),
                weight: 1.0,
            })
            .collect();
        let t = MatchTable { horizon: 28, rows };
        assert_eq!(successful_events(&t, 7), 1);
        assert_eq!(successful_events(&t, 21), 2);
        assert_eq!(successful_events_in(&t, 28, 1) + successful_events_in(&t, 28, 2), 3);
    }
}
