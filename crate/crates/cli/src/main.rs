use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use feddct_cli::compare::{compare, table_to_csv};
use feddct_cli::error::CliError;
use feddct_cli::run::{cmd_run, read_config, RunFlags};
use feddct_cli::summary::DEFAULT_SMOOTHING_WINDOW;
use feddct_cli::sweep::{parse_values, runs_to_csv, summary_to_csv, sweep, SweepAxis};

/// Deterministic virtual-time simulator of federated learning over
/// unreliable, heterogeneous clients.
#[derive(Parser)]
#[command(name = "feddct", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv, summary.json and
    /// config.resolved.json into the output directory.
    Run {
        /// Path to the JSON config (missing keys take defaults).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if absent).
        #[arg(long)]
        out: PathBuf,
        /// Accuracy smoothing window (rounds) for best_accuracy.
        #[arg(long, default_value_t = DEFAULT_SMOOTHING_WINDOW)]
        smooth_window: usize,
        /// Also write shards.csv (client_id,sample_index,label).
        #[arg(long)]
        export_shards: bool,
        /// Also write tiers.csv (per-round tier membership).
        #[arg(long)]
        export_tiers: bool,
        /// Write the final global model checkpoint to this path.
        #[arg(long)]
        save_model: Option<PathBuf>,
        /// Do not charge the initial profiling waves to the virtual clock.
        #[arg(long)]
        no_startup_time: bool,
    },
    /// Run several configs (differing only in strategy/seed) and print a
    /// comparison table.
    Compare {
        /// Two or more config paths.
        #[arg(long, num_args = 2.., required = true)]
        configs: Vec<PathBuf>,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SMOOTHING_WINDOW)]
        smooth_window: usize,
    },
    /// Run a base config across one sweep axis, one run per value per
    /// seed; writes sweep.csv and sweep_summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Sweep axis: mu | noniid | delays.
        #[arg(long)]
        axis: String,
        /// Axis values: comma-separated (mu, noniid; noniid accepts
        /// "iid"), or ;-separated lists of comma-separated seconds
        /// (delays).
        #[arg(long)]
        values: String,
        /// Comma-separated seeds; defaults to the base config's seed.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SMOOTHING_WINDOW)]
        smooth_window: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            smooth_window,
            export_shards,
            export_tiers,
            save_model,
            no_startup_time,
        } => {
            let flags = RunFlags {
                smooth_window,
                export_shards,
                export_tiers,
                save_model,
                charge_startup_time: !no_startup_time,
            };
            let artifacts = cmd_run(&config, &out, &flags)?;
            let time = artifacts
                .summary
                .time_to_target_s
                .map(|t| format!("{t:.1} s"))
                .unwrap_or_else(|| "not reached".into());
            println!(
                "{}: {} rounds, best accuracy {:.4}, time to target {}",
                artifacts.summary.strategy.as_str(),
                artifacts.summary.rounds,
                artifacts.summary.best_accuracy,
                time
            );
            Ok(())
        }
        Command::Compare {
            configs,
            out,
            smooth_window,
        } => {
            let parsed: Vec<_> = configs
                .iter()
                .map(|p| read_config(p))
                .collect::<Result<_, _>>()?;
            let table = compare(&parsed, smooth_window)?;
            let csv = table_to_csv(&table);
            print!("{csv}");
            if let Some(path) = out {
                fs::write(&path, &csv).map_err(|e| CliError::io(&path, e))?;
            }
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            out,
            smooth_window,
        } => {
            let base = read_config(&config)?;
            let axis_parsed = SweepAxis::parse(&axis)
                .ok_or_else(|| CliError::Usage(format!("unknown sweep axis {axis:?} (mu | noniid | delays)")))?;
            let values = parse_values(axis_parsed, &values)?;
            let seeds = match seeds {
                None => vec![base.seed],
                Some(list) => list
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<u64>()
                            .map_err(|e| CliError::Usage(format!("bad seed {s:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let result = sweep(&base, &values, &seeds, smooth_window)?;
            fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
            let runs_csv = runs_to_csv(&axis, &result);
            let summary_csv = summary_to_csv(&axis, &result);
            let runs_path = out.join("sweep.csv");
            fs::write(&runs_path, &runs_csv).map_err(|e| CliError::io(&runs_path, e))?;
            let summary_path = out.join("sweep_summary.csv");
            fs::write(&summary_path, &summary_csv).map_err(|e| CliError::io(&summary_path, e))?;
            print!("{summary_csv}");
            Ok(())
        }
    }
}
