//! The `trace.csv` format: one row per global round, stable column
//! schema, lossless parse-back.

use feddct_core::config::StrategyKind;
use feddct_core::engine::RoundReport;
use thiserror::Error;

pub const TRACE_HEADER: &str = "round,virtual_time_s,strategy,selected_tier,num_selected,num_completed,num_timed_out,accuracy,round_duration_s,dmax_per_tier";

/// Separator inside the `dmax_per_tier` list field.
const LIST_SEP: char = ';';

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: u32,
    pub virtual_time_s: f64,
    pub strategy: StrategyKind,
    pub selected_tier: u32,
    pub num_selected: u32,
    pub num_completed: u32,
    pub num_timed_out: u32,
    pub accuracy: f64,
    pub round_duration_s: f64,
    pub dmax_per_tier_s: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("trace line {line}: bad field `{field}`: {reason}")]
    BadField {
        line: usize,
        field: &'static str,
        reason: String,
    },
    #[error("missing or wrong header line")]
    BadHeader,
}

impl TraceRow {
    pub fn from_report(report: &RoundReport) -> Self {
        Self {
            round: report.round,
            virtual_time_s: report.virtual_time_s,
            strategy: report.strategy,
            selected_tier: report.selected_tier,
            num_selected: report.participants.len() as u32,
            num_completed: report.completed.len() as u32,
            num_timed_out: report.timed_out.len() as u32,
            accuracy: report.accuracy,
            round_duration_s: report.duration_s,
            dmax_per_tier_s: report.dmax_per_tier_s.clone(),
        }
    }

    pub fn to_csv_line(&self) -> String {
        let dmax = self
            .dmax_per_tier_s
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(&LIST_SEP.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.round,
            self.virtual_time_s,
            self.strategy.as_str(),
            self.selected_tier,
            self.num_selected,
            self.num_completed,
            self.num_timed_out,
            self.accuracy,
            self.round_duration_s,
            dmax
        )
    }

    pub fn parse_csv_line(line: &str, line_no: usize) -> Result<Self, TraceError> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(TraceError::ColumnCount {
                line: line_no,
                expected: 10,
                found: fields.len(),
            });
        }
        fn bad(line: usize, field: &'static str, reason: impl ToString) -> TraceError {
            TraceError::BadField {
                line,
                field,
                reason: reason.to_string(),
            }
        }
        let strategy = StrategyKind::parse(fields[2])
            .ok_or_else(|| bad(line_no, "strategy", format!("unknown strategy {:?}", fields[2])))?;
        let dmax_per_tier_s = if fields[9].is_empty() {
            Vec::new()
        } else {
            fields[9]
                .split(LIST_SEP)
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| bad(line_no, "dmax_per_tier", e))?
        };
        Ok(Self {
            round: fields[0].parse().map_err(|e| bad(line_no, "round", e))?,
            virtual_time_s: fields[1].parse().map_err(|e| bad(line_no, "virtual_time_s", e))?,
            strategy,
            selected_tier: fields[3].parse().map_err(|e| bad(line_no, "selected_tier", e))?,
            num_selected: fields[4].parse().map_err(|e| bad(line_no, "num_selected", e))?,
            num_completed: fields[5].parse().map_err(|e| bad(line_no, "num_completed", e))?,
            num_timed_out: fields[6].parse().map_err(|e| bad(line_no, "num_timed_out", e))?,
            accuracy: fields[7].parse().map_err(|e| bad(line_no, "accuracy", e))?,
            round_duration_s: fields[8].parse().map_err(|e| bad(line_no, "round_duration_s", e))?,
            dmax_per_tier_s,
        })
    }
}

/// Render a full trace file, header included.
pub fn trace_to_string(reports: &[RoundReport]) -> String {
    let mut out = String::with_capacity(reports.len() * 72 + TRACE_HEADER.len() + 1);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for report in reports {
        out.push_str(&TraceRow::from_report(report).to_csv_line());
        out.push('\n');
    }
    out
}

pub fn parse_trace(contents: &str) -> Result<Vec<TraceRow>, TraceError> {
    let mut lines = contents.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(TraceError::BadHeader);
    }
    lines
        .enumerate()
        .map(|(i, line)| TraceRow::parse_csv_line(line, i + 2))
        .collect()
}
