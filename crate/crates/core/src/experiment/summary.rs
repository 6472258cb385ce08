use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::batch::ExperimentRecord;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SummaryError {
    #[error("no records to summarize")]
    Empty,
}

/// Aggregates over the runs of one scenario and protocol. Error
/// statistics cover the runs that produced an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub scenario: String,
    pub protocol: String,
    pub runs: usize,
    pub failed: usize,
    pub censored: usize,
    pub mean_abs_rel_error: Option<f64>,
    pub median_abs_rel_error: Option<f64>,
    pub stddev_abs_rel_error: Option<f64>,
    /// Mean signed relative error.
    pub bias: Option<f64>,
    pub mean_rounds_or_hops: Option<f64>,
    pub mean_true_n: f64,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { (v[mid - 1] + v[mid]) / 2.0 } else { v[mid] })
}

/// Sample standard deviation; 0 for a single value.
fn stddev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

fn summarize_group(scenario: &str, protocol: &str, rows: &[&ExperimentRecord]) -> SummaryStats {
    let signed: Vec<f64> = rows.iter().filter_map(|r| r.signed_error()).collect();
    let abs: Vec<f64> = signed.iter().map(|e| e.abs()).collect();
    let done: Vec<f64> = rows
        .iter()
        .filter(|r| !r.failed())
        .map(|r| r.rounds_or_hops as f64)
        .collect();
    let sizes: Vec<f64> = rows.iter().map(|r| r.true_n as f64).collect();
    SummaryStats {
        scenario: scenario.to_string(),
        protocol: protocol.to_string(),
        runs: rows.len(),
        failed: rows.iter().filter(|r| r.failed()).count(),
        censored: rows.iter().filter(|r| r.completed_via == "censored").count(),
        mean_abs_rel_error: mean(&abs),
        median_abs_rel_error: median(&abs),
        stddev_abs_rel_error: stddev(&abs),
        bias: mean(&signed),
        mean_rounds_or_hops: mean(&done),
        mean_true_n: mean(&sizes).unwrap_or(0.0),
    }
}

/// One summary per (scenario, protocol), in first-appearance order.
pub fn summarize(records: &[ExperimentRecord]) -> Result<Vec<SummaryStats>, SummaryError> {
    if records.is_empty() {
        return Err(SummaryError::Empty);
    }
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut groups: BTreeMap<(&str, &str), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.scenario.as_str(), r.protocol.as_str());
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    Ok(order
        .into_iter()
        .map(|k| summarize_group(k.0, k.1, &groups[&k]))
        .collect())
}
