//! Report files: curve CSVs, match table, significance JSON and the
//! markdown summary tables.

use std::fmt::Write as _;
use std::path::Path;

use eventlag_core::predict::MatchTable;
use eventlag_core::significance::{Band, LabelReport, SignificanceReport};
use serde::Serialize;

use crate::{Error, Result};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

/// One row per distance: empirical and mean randomized probability, the
/// mean difference and its interval, plus percentile bounds when present.
pub fn curve_csv(label: &LabelReport) -> String {
    let pct = label.difference.first().is_some_and(|b| b.percentile_low.is_some());
    let mut s = String::from("distance,empirical,randomized_mean,diff,ci_low,ci_high");
    if pct {
        s.push_str(",pct_low,pct_high");
    }
    s.push('\n');
    for (i, band) in label.difference.iter().enumerate() {
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            i + 1,
            label.empirical.probabilities[i],
            label.randomized_mean[i],
            band.mean,
            band.low,
            band.high
        );
        if let (Some(lo), Some(hi)) = (band.percentile_low, band.percentile_high) {
            let _ = write!(s, ",{lo},{hi}");
        }
        s.push('\n');
    }
    s
}

/// Randomized curve of every run, one row per run.
pub fn runs_csv(label: &LabelReport) -> String {
    let horizon = label.randomized_mean.len();
    let mut s = String::from("run");
    for d in 1..=horizon {
        let _ = write!(s, ",d{d}");
    }
    s.push('\n');
    for (r, curve) in label.run_curves.iter().enumerate() {
        let _ = write!(s, "{r}");
        for p in curve {
            let _ = write!(s, ",{p}");
        }
        s.push('\n');
    }
    s
}

pub fn match_table_csv(table: &MatchTable) -> String {
    let mut s = String::from("signal_event,cluster,target_event,distance,weight\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.signal_event,
            opt(r.cluster.map(|c| c.to_string())),
            opt(r.target_event.map(|t| t.to_string())),
            opt(r.distance.map(|d| d.to_string())),
            r.weight
        );
    }
    s
}

fn interval(b: &Band) -> String {
    format!("{:.2} [{:.2}; {:.2}]", b.mean, b.low, b.high)
}

fn percentile_interval(b: &Band) -> Option<String> {
    Some(format!(
        "{:.2} [{:.2}; {:.2}]",
        b.mean, b.percentile_low?, b.percentile_high?
    ))
}

fn table_row(s: &mut String, cells: &[String]) {
    s.push('|');
    for c in cells {
        let _ = write!(s, " {c} |");
    }
    s.push('\n');
}

/// Successful-event counts: empirical integer against the randomized mean
/// with its 95% interval, one column per window.
pub fn success_table(report: &SignificanceReport) -> String {
    let mut s = String::new();
    let mut head = vec!["Sentiment events".to_string()];
    head.extend(report.success.iter().map(|r| format!("Predictive within {} days", r.window)));
    table_row(&mut s, &head);
    table_row(&mut s, &vec!["---".to_string(); head.len()]);
    let mut emp = vec!["Empirical Results".to_string()];
    emp.extend(report.success.iter().map(|r| r.empirical.to_string()));
    table_row(&mut s, &emp);
    let mut rnd = vec!["randomised Results 95% CI".to_string()];
    rnd.extend(report.success.iter().map(|r| interval(&r.randomized)));
    table_row(&mut s, &rnd);
    if report.percentile {
        let mut pct = vec!["randomised Results 95% percentile".to_string()];
        pct.extend(
            report
                .success
                .iter()
                .map(|r| percentile_interval(&r.randomized).unwrap_or_default()),
        );
        table_row(&mut s, &pct);
    }
    s
}

/// Per-cluster share of successful signal events, one table per window.
pub fn frequency_tables(report: &SignificanceReport) -> String {
    let mut s = String::new();
    for (i, t) in report.cluster_frequencies.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "Successful events within {} days\n", t.window);
        let mut head = vec!["Spike Types".to_string()];
        head.extend(t.cells.iter().map(|c| format!("Spike type {}", c.cluster)));
        table_row(&mut s, &head);
        table_row(&mut s, &vec!["---".to_string(); head.len()]);
        let mut obs = vec!["Observed, %".to_string()];
        obs.extend(t.cells.iter().map(|c| format!("{:.2}", c.observed_pct)));
        table_row(&mut s, &obs);
        let mut rnd = vec!["Random 95% CI".to_string()];
        rnd.extend(t.cells.iter().map(|c| interval(&c.randomized_pct)));
        table_row(&mut s, &rnd);
        if report.percentile {
            let mut pct = vec!["Random 95% percentile".to_string()];
            pct.extend(
                t.cells
                    .iter()
                    .map(|c| percentile_interval(&c.randomized_pct).unwrap_or_default()),
            );
            table_row(&mut s, &pct);
        }
    }
    s
}
