//! The `sweep` command: vary one axis of a base config over a value
//! list, one run per (value, seed).

use feddct_core::config::{MasterFraction, SimConfig};
use feddct_core::engine;

use crate::compare::median;
use crate::error::CliError;
use crate::summary::{summarize, RunSummary};
use crate::trace::TraceRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Straggler probability.
    Mu,
    /// Master-class fraction (or `iid`).
    Noniid,
    /// Base delay means, one list per value (`;`-separated lists of
    /// `,`-separated seconds).
    Delays,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mu" => Some(SweepAxis::Mu),
            "noniid" => Some(SweepAxis::Noniid),
            "delays" => Some(SweepAxis::Delays),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AxisValue {
    Mu(f64),
    Noniid(MasterFraction),
    Delays(Vec<f64>),
}

impl AxisValue {
    pub fn label(&self) -> String {
        match self {
            AxisValue::Mu(v) => v.to_string(),
            AxisValue::Noniid(f) => f.to_string(),
            AxisValue::Delays(d) => d
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }

    fn apply(&self, base: &SimConfig) -> SimConfig {
        let mut config = base.clone();
        match self {
            AxisValue::Mu(v) => config.mu = *v,
            AxisValue::Noniid(f) => config.noniid_fraction = *f,
            AxisValue::Delays(d) => config.base_delay_means_s = d.clone(),
        }
        config
    }
}

/// Parse the `--values` argument for an axis. `mu` and `noniid` take
/// comma-separated values (`noniid` also accepts `iid`); `delays` takes
/// `;`-separated lists of comma-separated seconds.
pub fn parse_values(axis: SweepAxis, input: &str) -> Result<Vec<AxisValue>, CliError> {
    let usage = |reason: String| CliError::Usage(reason);
    let items: Vec<&str> = match axis {
        SweepAxis::Delays => input.split(';').filter(|s| !s.trim().is_empty()).collect(),
        _ => input.split(',').filter(|s| !s.trim().is_empty()).collect(),
    };
    if items.is_empty() {
        return Err(usage("sweep needs at least one value".into()));
    }
    items
        .into_iter()
        .map(|item| {
            let item = item.trim();
            match axis {
                SweepAxis::Mu => item
                    .parse::<f64>()
                    .map(AxisValue::Mu)
                    .map_err(|e| usage(format!("bad mu value {item:?}: {e}"))),
                SweepAxis::Noniid => {
                    if item == "iid" {
                        Ok(AxisValue::Noniid(MasterFraction::Iid))
                    } else {
                        item.parse::<f64>()
                            .map(|v| AxisValue::Noniid(MasterFraction::Fraction(v)))
                            .map_err(|e| usage(format!("bad noniid value {item:?}: {e}")))
                    }
                }
                SweepAxis::Delays => item
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map(AxisValue::Delays)
                    .map_err(|e| usage(format!("bad delays list {item:?}: {e}"))),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value_label: String,
    pub seed: u64,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
}

/// One run per (value, seed). Each run's config must still validate.
pub fn sweep(
    base: &SimConfig,
    values: &[AxisValue],
    seeds: &[u64],
    smooth_window: usize,
) -> Result<SweepResult, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one seed".into()));
    }
    let mut runs = Vec::with_capacity(values.len() * seeds.len());
    for value in values {
        for &seed in seeds {
            let mut config = value.apply(base);
            config.seed = seed;
            let config = config.validate()?;
            let output = engine::run(&config)?;
            let rows: Vec<TraceRow> = output.reports.iter().map(TraceRow::from_report).collect();
            runs.push(SweepRun {
                value_label: value.label(),
                seed,
                summary: summarize(&rows, &config, smooth_window),
            });
        }
    }
    Ok(SweepResult { runs })
}

/// Per-run rows: `axis,value,seed,strategy,...`.
pub fn runs_to_csv(axis_name: &str, result: &SweepResult) -> String {
    let mut out = String::from(
        "axis,value,seed,strategy,best_accuracy,time_to_target_s,rounds,total_stragglers\n",
    );
    for run in &result.runs {
        let time = run
            .summary
            .time_to_target_s
            .map(|t| t.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            axis_name,
            run.value_label,
            run.seed,
            run.summary.strategy.as_str(),
            run.summary.best_accuracy,
            time,
            run.summary.rounds,
            run.summary.total_stragglers
        ));
    }
    out
}

/// Aggregated rows keyed by axis value: medians over seeds.
pub fn summary_to_csv(axis_name: &str, result: &SweepResult) -> String {
    let mut out =
        String::from("axis,value,runs,median_best_accuracy,median_time_to_target_s\n");
    let mut labels: Vec<String> = Vec::new();
    for run in &result.runs {
        if !labels.contains(&run.value_label) {
            labels.push(run.value_label.clone());
        }
    }
    for label in labels {
        let of_value: Vec<&SweepRun> = result
            .runs
            .iter()
            .filter(|r| r.value_label == label)
            .collect();
        let acc = median(of_value.iter().map(|r| r.summary.best_accuracy).collect());
        let time = median(
            of_value
                .iter()
                .map(|r| r.summary.time_to_target_s.unwrap_or(f64::INFINITY))
                .collect(),
        );
        let time = if time.is_finite() {
            time.to_string()
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            axis_name,
            label,
            of_value.len(),
            acc,
            time
        ));
    }
    out
}
