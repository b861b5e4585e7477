//! Summaries of a chain: acceptance rates, likelihood-change traces,
//! credible intervals, coverage and the census of visited tree structures.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proposals::ProposalKind;
use crate::sampler::OutcomeRecord;

/// Fraction of proposals of the given kinds accepted at iterations
/// `>= from_iter`. An empty `kinds` slice means every kind. `None` when no
/// proposal matches.
pub fn acceptance_rate(outcomes: &[OutcomeRecord], kinds: &[ProposalKind], from_iter: usize) -> Option<f64> {
    let (mut proposed, mut accepted) = (0usize, 0usize);
    for r in outcomes.iter().filter(|r| r.iter >= from_iter) {
        if kinds.is_empty() || kinds.contains(&r.outcome.kind) {
            proposed += 1;
            accepted += r.outcome.accepted as usize;
        }
    }
    (proposed > 0).then(|| accepted as f64 / proposed as f64)
}

/// Change in log integrated likelihood of every evaluated proposal of `kind`,
/// in chain order. Proposals rejected before evaluation carry no value.
pub fn delta_logil_trace(outcomes: &[OutcomeRecord], kind: ProposalKind) -> Vec<f64> {
    outcomes.iter().filter(|r| r.outcome.kind == kind).filter_map(|r| r.outcome.delta_log_il).collect()
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed interval holding `level` of the draws.
pub fn predictive_interval(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if draws.len() < 20 {
        return Err(Error::Config(format!("need at least 20 draws for an interval, got {}", draws.len())));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Config(format!("interval level must lie in (0, 1], got {level}")));
    }
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&s, tail), quantile(&s, 1.0 - tail)))
}

/// Fraction of `truth` values falling inside their closed intervals.
pub fn empirical_coverage(intervals: &[(f64, f64)], truth: &[f64]) -> Result<f64> {
    if intervals.len() != truth.len() || truth.is_empty() {
        return Err(Error::Dimension(format!("{} intervals for {} truths", intervals.len(), truth.len())));
    }
    let inside = intervals.iter().zip(truth).filter(|(&(lo, hi), &t)| lo <= t && t <= hi).count();
    Ok(inside as f64 / truth.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalRow {
    pub id: usize,
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
    pub truth: Option<f64>,
}

/// Interval and posterior mean at every point from `predictions[draw][point]`.
pub fn interval_table(predictions: &[Vec<f64>], level: f64, truth: Option<&[f64]>) -> Result<Vec<IntervalRow>> {
    let n_points = predictions.first().map_or(0, Vec::len);
    if let Some(t) = truth {
        if t.len() != n_points {
            return Err(Error::Dimension(format!("{} truths for {n_points} points", t.len())));
        }
    }
    (0..n_points)
        .map(|p| {
            let draws: Vec<f64> = predictions.iter().map(|d| d[p]).collect();
            let (lower, upper) = predictive_interval(&draws, level)?;
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            Ok(IntervalRow { id: p, lower, mean, upper, truth: truth.map(|t| t[p]) })
        })
        .collect()
}

/// Coverage of the rows that carry a truth value.
pub fn table_coverage(rows: &[IntervalRow]) -> Option<f64> {
    let (iv, t): (Vec<_>, Vec<_>) = rows.iter().filter_map(|r| r.truth.map(|t| ((r.lower, r.upper), t))).unzip();
    empirical_coverage(&iv, &t).ok()
}

/// Visit counts of distinct tree structures over all kept draws and trees.
pub fn tree_census<S: AsRef<str>>(draws: &[Vec<S>]) -> BTreeMap<String, usize> {
    let mut census = BTreeMap::new();
    for key in draws.iter().flatten() {
        *census.entry(key.as_ref().to_string()).or_insert(0) += 1;
    }
    census
}

/// Census entries, most visited first.
pub fn census_ranked(census: &BTreeMap<String, usize>) -> Vec<(&str, usize)> {
    let mut v: Vec<_> = census.iter().map(|(k, &c)| (k.as_str(), c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v
}

/// Proposed and accepted counts per kind from `from_iter` on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRow {
    pub kind: String,
    pub proposed: usize,
    pub accepted: usize,
    pub rate: Option<f64>,
}

pub fn acceptance_summary(outcomes: &[OutcomeRecord], from_iter: usize) -> Vec<AcceptanceRow> {
    let mut rows: Vec<AcceptanceRow> = ProposalKind::ALL
        .iter()
        .map(|&k| AcceptanceRow { kind: k.name().to_string(), proposed: 0, accepted: 0, rate: None })
        .collect();
    let mut all = AcceptanceRow { kind: "all".into(), proposed: 0, accepted: 0, rate: None };
    for r in outcomes.iter().filter(|r| r.iter >= from_iter) {
        let row = &mut rows[ProposalKind::ALL.iter().position(|&k| k == r.outcome.kind).unwrap()];
        row.proposed += 1;
        all.proposed += 1;
        if r.outcome.accepted {
            row.accepted += 1;
            all.accepted += 1;
        }
    }
    rows.push(all);
    for row in &mut rows {
        row.rate = (row.proposed > 0).then(|| row.accepted as f64 / row.proposed as f64);
    }
    rows
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::File { path: path.display().to_string(), msg: e.to_string() })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::File { path: path.display().to_string(), msg: e.to_string() }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:?}"))
}

/// `iter,tree,kind,accepted,delta_logil`; the last field is blank when the
/// proposal was never evaluated.
pub fn write_traces(outcomes: &[OutcomeRecord], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(["iter", "tree", "kind", "accepted", "delta_logil"]).map_err(&e)?;
    for r in outcomes {
        w.write_record([
            r.iter.to_string(),
            r.tree.to_string(),
            r.outcome.kind.name().to_string(),
            (r.outcome.accepted as u8).to_string(),
            opt(r.outcome.delta_log_il),
        ])
        .map_err(&e)?;
    }
    w.flush()?;
    Ok(())
}

/// `x_id,lower,mean,upper,truth`.
pub fn write_intervals(rows: &[IntervalRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(["x_id", "lower", "mean", "upper", "truth"]).map_err(&e)?;
    for r in rows {
        w.write_record([
            r.id.to_string(),
            format!("{:?}", r.lower),
            format!("{:?}", r.mean),
            format!("{:?}", r.upper),
            opt(r.truth),
        ])
        .map_err(&e)?;
    }
    w.flush()?;
    Ok(())
}

/// `canonical,count`, most visited first.
pub fn write_census(census: &BTreeMap<String, usize>, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(["canonical", "count"]).map_err(&e)?;
    for (k, c) in census_ranked(census) {
        w.write_record([k.to_string(), c.to_string()]).map_err(&e)?;
    }
    w.flush()?;
    Ok(())
}

/// `kind,proposed,accepted,rate`.
pub fn write_acceptance(rows: &[AcceptanceRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(["kind", "proposed", "accepted", "rate"]).map_err(&e)?;
    for r in rows {
        w.write_record([r.kind.clone(), r.proposed.to_string(), r.accepted.to_string(), opt(r.rate)]).map_err(&e)?;
    }
    w.flush()?;
    Ok(())
}
