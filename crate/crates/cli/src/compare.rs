//! The `compare` command: run several configs that differ only in
//! strategy and/or seed, group summaries by strategy, and report median
//! best accuracy and time-to-target plus the improvement of the dynamic
//! cross-tier scheme over the best baseline.

use feddct_core::config::{SimConfig, StrategyKind};
use feddct_core::engine;

use crate::error::CliError;
use crate::summary::{summarize, RunSummary};
use crate::trace::TraceRow;

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyAggregate {
    pub strategy: StrategyKind,
    pub runs: usize,
    pub median_best_accuracy: f64,
    /// `None` when the median run never reached the target.
    pub median_time_to_target_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub rows: Vec<StrategyAggregate>,
    /// Which strategy the improvement columns refer to.
    pub reference: StrategyKind,
    /// Relative accuracy improvement over the best baseline, percent.
    pub impr_accuracy_pct: Option<f64>,
    /// Relative reduction of time-to-target vs the best baseline, percent.
    pub impr_time_pct: Option<f64>,
}

pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median where unreached targets count as infinitely slow; `None` when
/// the median itself is unreached.
fn median_time(times: &[Option<f64>]) -> Option<f64> {
    let values: Vec<f64> = times.iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
    let m = median(values);
    m.is_finite().then_some(m)
}

/// Every config must match the first except for `strategy` and `seed`.
fn check_compatible(configs: &[SimConfig]) -> Result<(), CliError> {
    let normalize = |c: &SimConfig| {
        let mut c = c.clone();
        c.strategy = StrategyKind::FedDct;
        c.seed = 0;
        c
    };
    let reference = normalize(&configs[0]);
    for config in &configs[1..] {
        let candidate = normalize(config);
        if candidate != reference {
            let a = serde_json::to_value(&reference).expect("serializes");
            let b = serde_json::to_value(&candidate).expect("serializes");
            let field = a
                .as_object()
                .unwrap()
                .iter()
                .find(|(k, v)| b.get(*k) != Some(v))
                .map(|(k, _)| k.clone())
                .unwrap_or_else(|| "?".to_string());
            return Err(CliError::IncompatibleConfigs { field });
        }
    }
    Ok(())
}

/// Run every config and aggregate per strategy.
pub fn compare(configs: &[SimConfig], smooth_window: usize) -> Result<ComparisonTable, CliError> {
    if configs.len() < 2 {
        return Err(CliError::Usage(
            "compare needs at least two configs (differing only in strategy and/or seed)".into(),
        ));
    }
    check_compatible(configs)?;

    let mut summaries: Vec<RunSummary> = Vec::with_capacity(configs.len());
    for config in configs {
        let output = engine::run(config)?;
        let rows: Vec<TraceRow> = output.reports.iter().map(TraceRow::from_report).collect();
        summaries.push(summarize(&rows, config, smooth_window));
    }
    Ok(build_table(&summaries))
}

/// Aggregate precomputed summaries into the comparison table.
pub fn build_table(summaries: &[RunSummary]) -> ComparisonTable {
    let mut rows: Vec<StrategyAggregate> = Vec::new();
    for kind in StrategyKind::ALL {
        let of_kind: Vec<&RunSummary> = summaries.iter().filter(|s| s.strategy == kind).collect();
        if of_kind.is_empty() {
            continue;
        }
        rows.push(StrategyAggregate {
            strategy: kind,
            runs: of_kind.len(),
            median_best_accuracy: median(of_kind.iter().map(|s| s.best_accuracy).collect()),
            median_time_to_target_s: median_time(
                &of_kind.iter().map(|s| s.time_to_target_s).collect::<Vec<_>>(),
            ),
        });
    }

    let reference = rows
        .iter()
        .map(|r| r.strategy)
        .find(|&k| k == StrategyKind::FedDct)
        .unwrap_or(rows[0].strategy);
    let reference_row = rows.iter().find(|r| r.strategy == reference).unwrap().clone();
    let baselines: Vec<&StrategyAggregate> =
        rows.iter().filter(|r| r.strategy != reference).collect();

    // With no baseline present the reference is compared against itself,
    // so both improvements are zero.
    let (best_acc, best_time) = if baselines.is_empty() {
        (
            Some(reference_row.median_best_accuracy),
            reference_row.median_time_to_target_s,
        )
    } else {
        (
            baselines
                .iter()
                .map(|r| r.median_best_accuracy)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
            baselines
                .iter()
                .filter_map(|r| r.median_time_to_target_s)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
        )
    };

    let impr_accuracy_pct = best_acc.map(|base| {
        (reference_row.median_best_accuracy - base) / base * 100.0
    });
    let impr_time_pct = match (reference_row.median_time_to_target_s, best_time) {
        (Some(reference_time), Some(base)) => Some((base - reference_time) / base * 100.0),
        _ => None,
    };

    ComparisonTable {
        rows,
        reference,
        impr_accuracy_pct,
        impr_time_pct,
    }
}

pub fn table_to_csv(table: &ComparisonTable) -> String {
    let mut out = String::from("strategy,runs,best_accuracy,time_to_target_s,impr_accuracy_pct,impr_time_pct\n");
    for row in &table.rows {
        let time = row
            .median_time_to_target_s
            .map(|t| t.to_string())
            .unwrap_or_default();
        let (ia, it) = if row.strategy == table.reference {
            (
                table.impr_accuracy_pct.map(|v| format!("{v:.2}")).unwrap_or_default(),
                table.impr_time_pct.map(|v| format!("{v:.2}")).unwrap_or_default(),
            )
        } else {
            (String::new(), String::new())
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.strategy.as_str(),
            row.runs,
            row.median_best_accuracy,
            time,
            ia,
            it
        ));
    }
    out
}
