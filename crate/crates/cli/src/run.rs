//! The `run` command: execute one configured experiment and write its
//! artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use feddct_core::config::SimConfig;
use feddct_core::dataset::shards_to_csv;
use feddct_core::engine::{self, RoundReport, RunOptions, SimEnv};
use feddct_core::model::write_checkpoint;

use crate::error::CliError;
use crate::summary::{summarize, RunSummary};
use crate::trace::{trace_to_string, TraceRow};

#[derive(Debug, Clone)]
pub struct RunFlags {
    pub smooth_window: usize,
    pub export_shards: bool,
    pub export_tiers: bool,
    pub save_model: Option<PathBuf>,
    /// Charge the initial profiling waves to the virtual clock.
    pub charge_startup_time: bool,
}

impl Default for RunFlags {
    fn default() -> Self {
        Self {
            smooth_window: crate::summary::DEFAULT_SMOOTHING_WINDOW,
            export_shards: false,
            export_tiers: false,
            save_model: None,
            charge_startup_time: true,
        }
    }
}

pub struct RunArtifacts {
    pub config: SimConfig,
    pub reports: Vec<RoundReport>,
    pub summary: RunSummary,
}

pub fn read_config(path: &Path) -> Result<SimConfig, CliError> {
    let contents = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(SimConfig::from_json_str(&contents)?.validate()?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Tier membership per round: `round,tier,client_ids` with ids
/// `;`-separated.
fn tiers_to_csv(reports: &[RoundReport]) -> String {
    let mut out = String::from("round,tier,client_ids\n");
    for report in reports {
        for (tier, members) in report.tier_membership.iter().enumerate() {
            let ids = members
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!("{},{},{}\n", report.round, tier + 1, ids));
        }
    }
    out
}

/// Run the config and write `trace.csv`, `summary.json`, and
/// `config.resolved.json` into `out_dir` (plus any opted-in extras).
pub fn cmd_run(config_path: &Path, out_dir: &Path, flags: &RunFlags) -> Result<RunArtifacts, CliError> {
    let config = read_config(config_path)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let options = RunOptions {
        charge_startup_time: flags.charge_startup_time,
    };
    let env = SimEnv::prepare_with(&config, options)?;
    if flags.export_shards {
        write_file(&out_dir.join("shards.csv"), &shards_to_csv(&env.dataset, &env.shards))?;
    }
    let output = engine::strategy_for(config.strategy).run(&env)?;

    write_file(&out_dir.join("trace.csv"), &trace_to_string(&output.reports))?;

    let rows: Vec<TraceRow> = output.reports.iter().map(TraceRow::from_report).collect();
    let summary = summarize(&rows, &config, flags.smooth_window);
    let summary_json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&out_dir.join("summary.json"), &summary_json)?;

    write_file(&out_dir.join("config.resolved.json"), &config.to_json_pretty())?;

    if flags.export_tiers {
        write_file(&out_dir.join("tiers.csv"), &tiers_to_csv(&output.reports))?;
    }
    if let Some(model_path) = &flags.save_model {
        let file = fs::File::create(model_path).map_err(|e| CliError::io(model_path, e))?;
        write_checkpoint(&output.final_model, file).map_err(feddct_core::engine::EngineError::from)?;
    }

    Ok(RunArtifacts {
        config,
        reports: output.reports,
        summary,
    })
}
