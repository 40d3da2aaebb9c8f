//! Run summaries: a pure function of the trace, recomputable offline.

use feddct_core::config::{SimConfig, StrategyKind};
use serde::{Deserialize, Serialize};

use crate::trace::TraceRow;

/// Accuracy curves are smoothed over a trailing window of this many
/// rounds before taking the best value.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 60;

/// A transient spike does not count as reaching the target: the accuracy
/// must hold for this many consecutive reports.
pub const TARGET_CONSECUTIVE_REPORTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: StrategyKind,
    pub best_accuracy: f64,
    /// Virtual seconds until the accuracy first reached the target and
    /// stayed there for three consecutive reports; `null` if never.
    pub time_to_target_s: Option<f64>,
    pub rounds: u32,
    pub total_stragglers: u64,
    pub config_digest: String,
}

/// Trailing moving average with a partial window at the head.
pub fn smoothed_series(accuracies: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1);
    (0..accuracies.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &accuracies[lo..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Max of the smoothed accuracy series.
pub fn best_accuracy(rows: &[TraceRow], window: usize) -> f64 {
    let accuracies: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    smoothed_series(&accuracies, window)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Virtual time of the first report of the first run of
/// [`TARGET_CONSECUTIVE_REPORTS`] consecutive reports at or above the
/// target.
pub fn time_to_target(rows: &[TraceRow], target: f64) -> Option<f64> {
    rows.windows(TARGET_CONSECUTIVE_REPORTS)
        .find(|w| w.iter().all(|r| r.accuracy >= target))
        .map(|w| w[0].virtual_time_s)
}

pub fn summarize(rows: &[TraceRow], config: &SimConfig, window: usize) -> RunSummary {
    RunSummary {
        strategy: config.strategy,
        best_accuracy: best_accuracy(rows, window),
        time_to_target_s: time_to_target(rows, config.target_accuracy),
        rounds: rows.len() as u32,
        total_stragglers: rows.iter().map(|r| r.num_timed_out as u64).sum(),
        config_digest: config.digest(),
    }
}
