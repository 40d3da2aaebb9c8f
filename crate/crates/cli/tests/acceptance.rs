//! Acceptance suite: equation-level oracles, property checks, and
//! direction-of-effect trend checks on the synthetic task.
//!
//! Run with `cargo test -p feddct-cli --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::fs;
use std::time::Instant;

use rand::Rng;

use feddct_cli::run::{cmd_run, RunFlags};
use feddct_cli::summary::{summarize, RunSummary};
use feddct_cli::trace::TraceRow;
use feddct_core::client::{ClientId, ClientProfile, ClientState};
use feddct_core::config::{SimConfig, StrategyKind};
use feddct_core::engine::{self, round_duration, RoundReport};
use feddct_core::latency::{LatencyModel, SampleKey};
use feddct_core::rng::{derive_stream, RngStreams};
use feddct_core::selection::{compute_thresholds, move_tier, select_participants};
use feddct_core::tiering::{tier, update_profile, TierTable};

/// Fixed seed panel for the trend criteria.
const SEED_PANEL: [u64; 5] = [42, 7, 99, 1, 2];

fn default_config() -> SimConfig {
    SimConfig::default().validate().unwrap()
}

fn run_summary(config: &SimConfig) -> RunSummary {
    let reports = engine::run(config).unwrap().reports;
    let rows: Vec<TraceRow> = reports.iter().map(TraceRow::from_report).collect();
    summarize(&rows, config, feddct_cli::summary::DEFAULT_SMOOTHING_WINDOW)
}

fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn median_time_over_seeds(strategy: StrategyKind, mu: f64) -> f64 {
    let times: Vec<f64> = SEED_PANEL
        .iter()
        .map(|&seed| {
            let config = SimConfig {
                strategy,
                mu,
                seed,
                ..default_config()
            };
            run_summary(&config).time_to_target_s.unwrap_or(f64::INFINITY)
        })
        .collect();
    median(times)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn c01_equation_oracles() {
    let started = Instant::now();
    let mut rng = derive_stream(101, "selection").unwrap();

    for case in 0..1000 {
        // Running-average profile update: one step against the closed
        // form, and a full replay against the arithmetic mean.
        let ct = rng.gen_range(0u64..50);
        let at = rng.gen_range(0.1f64..60.0);
        let observed = rng.gen_range(0.1f64..60.0);
        let mut profile = ClientProfile {
            id: ClientId(0),
            avg_time_s: at,
            successful_rounds: ct,
            state: ClientState::Active,
            latency_group: 0,
        };
        update_profile(&mut profile, observed);
        let expected = (at * ct as f64 + observed) / (ct as f64 + 1.0);
        assert!(rel_err(profile.avg_time_s, expected) < 1e-12, "case {case}: running average");

        let observations: Vec<f64> = (0..rng.gen_range(1usize..30))
            .map(|_| rng.gen_range(0.1f64..60.0))
            .collect();
        let mut replay = ClientProfile {
            successful_rounds: 0,
            ..profile.clone()
        };
        for &obs in &observations {
            update_profile(&mut replay, obs);
        }
        let mean = observations.iter().sum::<f64>() / observations.len() as f64;
        assert!(rel_err(replay.avg_time_s, mean) < 1e-12, "case {case}: replayed mean");

        // Selection weights: ct over the tier total.
        let counts: Vec<u64> = (0..rng.gen_range(1usize..20))
            .map(|_| rng.gen_range(1u64..100))
            .collect();
        let total: u64 = counts.iter().sum();
        for &c in &counts {
            let prob = c as f64 / total as f64;
            let brute = {
                let mut sum = 0.0;
                for &x in &counts {
                    sum += x as f64;
                }
                c as f64 / sum
            };
            assert!(rel_err(prob, brute) < 1e-12, "case {case}: selection weights");
        }

        // Per-tier and overall round durations.
        let omega = rng.gen_range(5.0f64..60.0);
        let tiers = rng.gen_range(1usize..=5);
        let mut times = Vec::new();
        let mut caps = Vec::new();
        for _ in 0..tiers {
            let n = rng.gen_range(1usize..=8);
            times.push((0..n).map(|_| rng.gen_range(0.1f64..90.0)).collect::<Vec<f64>>());
            caps.push(rng.gen_range(0.5f64..70.0));
        }
        let duration = round_duration(&times, &caps, omega);
        let brute = {
            let mut overall = f64::NEG_INFINITY;
            for (tier_times, &cap) in times.iter().zip(&caps) {
                let mut slowest = f64::NEG_INFINITY;
                for &t in tier_times {
                    if t > slowest {
                        slowest = t;
                    }
                }
                let mut tier_duration = slowest;
                if cap < tier_duration {
                    tier_duration = cap;
                }
                if omega < tier_duration {
                    tier_duration = omega;
                }
                if tier_duration > overall {
                    overall = tier_duration;
                }
            }
            overall
        };
        assert!(rel_err(duration, brute) < 1e-12, "case {case}: round duration");

        // Timeout thresholds: tier mean times beta, capped.
        let beta = rng.gen_range(1.01f64..3.0);
        let members: Vec<(ClientId, f64)> = (0..rng.gen_range(1usize..30))
            .map(|i| (ClientId(i as u32), rng.gen_range(0.1f64..50.0)))
            .collect();
        let m = rng.gen_range(1usize..10);
        let table = tier(&members, m);
        let thresholds = compute_thresholds(&table, beta, omega, table.num_tiers() as u32);
        for (k, threshold) in thresholds.iter().enumerate() {
            let tier_members = &table.tiers()[k];
            let mut sum = 0.0;
            for c in tier_members {
                sum += members.iter().find(|(id, _)| id == c).unwrap().1;
            }
            let mut brute = sum / tier_members.len() as f64 * beta;
            if omega < brute {
                brute = omega;
            }
            assert!(rel_err(*threshold, brute) < 1e-12, "case {case}: threshold tier {k}");
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "equation oracles took {elapsed:?}");
    println!("criterion 1 PASS: equation oracles exact to 1e-12 on 1000 random inputs ({elapsed:?})");
}

#[test]
fn c02_tiering_algorithm_oracle() {
    // Direct transcription of the index arithmetic: sort ascending, then
    // ts[(i/m)+1][(i%m)+1] = c (made 0-based).
    fn oracle(at: &[(ClientId, f64)], m: usize) -> Vec<Vec<ClientId>> {
        let mut tmp = at.to_vec();
        tmp.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut ts: Vec<Vec<ClientId>> = Vec::new();
        for (i, (c, _)) in tmp.iter().enumerate() {
            let tier_index = i / m;
            let slot = i % m;
            if ts.len() == tier_index {
                ts.push(Vec::new());
            }
            assert_eq!(ts[tier_index].len(), slot);
            ts[tier_index].push(*c);
        }
        ts
    }

    let mut rng = derive_stream(202, "selection").unwrap();
    for case in 0..1000 {
        let n = rng.gen_range(4usize..=100);
        let m = rng.gen_range(1usize..=(n + 2));
        let at: Vec<(ClientId, f64)> = (0..n)
            .map(|i| (ClientId(i as u32), rng.gen_range(0.1f64..100.0)))
            .collect();
        let table = tier(&at, m);
        let expected = oracle(&at, m);
        assert_eq!(table.tiers(), expected.as_slice(), "case {case}: n={n} m={m}");
    }
    println!("criterion 2 PASS: tier assignment matches the index-arithmetic oracle on 1000 maps");
}

#[test]
fn c03_tier_pointer_state_machine() {
    for num_tiers in 1u32..=10 {
        for t in 1..=num_tiers {
            for (acc, prev) in [(0.5, 0.4), (0.5, 0.5), (0.4, 0.5)] {
                let out = move_tier(t, acc, prev, num_tiers);
                assert!((1..=num_tiers).contains(&out), "clamped");
                let expected = if acc >= prev {
                    t.saturating_sub(1).max(1)
                } else {
                    (t + 1).min(num_tiers)
                };
                assert_eq!(out, expected, "M={num_tiers} t={t} acc={acc} prev={prev}");
            }
        }
    }
    println!("criterion 3 PASS: pointer moves match the min/max rule for all (t, sign, M <= 10)");
}

#[test]
fn c04_byte_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    for kind in StrategyKind::ALL {
        let config = SimConfig {
            strategy: kind,
            ..default_config()
        };
        let config_path = dir.path().join(format!("{}.json", kind.as_str()));
        fs::write(&config_path, config.to_json_pretty()).unwrap();
        let out_a = dir.path().join(format!("{}-a", kind.as_str()));
        let out_b = dir.path().join(format!("{}-b", kind.as_str()));
        cmd_run(&config_path, &out_a, &RunFlags::default()).unwrap();
        cmd_run(&config_path, &out_b, &RunFlags::default()).unwrap();
        let a = fs::read(out_a.join("trace.csv")).unwrap();
        let b = fs::read(out_b.join("trace.csv")).unwrap();
        assert_eq!(a, b, "{kind:?}: replay must be byte-identical");
    }
    println!("criterion 4 PASS: byte-identical trace.csv on replay for all four strategies");
}

#[test]
fn c05_straggler_injection_frequency() {
    let config = SimConfig {
        mu: 0.2,
        ..default_config()
    };
    let latency = LatencyModel::from_config(&config);
    let streams = RngStreams::new(config.seed);
    let draws = 100_000u32;
    let mut injected = 0u32;
    for i in 0..draws {
        let client = ClientId(i % config.num_clients);
        let round = i / config.num_clients;
        let group = (client.0 % 5) as usize;
        let sample = latency.sample(&streams, client, group, SampleKey::Round { round });
        injected += u32::from(sample.straggler);
    }
    let frequency = injected as f64 / draws as f64;
    assert!(
        (frequency - 0.20).abs() < 0.01,
        "criterion 5 FAIL: injection frequency {frequency}"
    );
    println!("criterion 5 PASS: injection frequency {frequency:.4} within 0.20 +/- 0.01 over {draws} draws");
}

#[test]
fn c06_selection_fairness_equalizes_participation() {
    // Fixed tiers, no stragglers: every selected client completes, so ct
    // counts participation directly.
    let config = default_config();
    let num_clients = config.num_clients as usize;
    let tier_size = config.clients_per_tier() as usize;
    let mut profiles: Vec<ClientProfile> = (0..num_clients)
        .map(|i| ClientProfile {
            id: ClientId(i as u32),
            avg_time_s: 1.0 + i as f64,
            successful_rounds: 0,
            state: ClientState::Active,
            latency_group: 0,
        })
        .collect();
    let at: Vec<(ClientId, f64)> = profiles.iter().map(|p| (p.id, p.avg_time_s)).collect();
    let table: TierTable = tier(&at, tier_size);
    let mut rng = derive_stream(config.seed, "selection").unwrap();

    for _ in 0..1000 {
        let picked =
            select_participants(&table, config.num_tiers, &profiles, config.tau, &mut rng).unwrap();
        for c in picked {
            profiles[c.index()].successful_rounds += 1;
        }
    }

    let bound = 2 * tier_size.div_ceil(config.tau as usize) as u64;
    for (k, members) in table.tiers().iter().enumerate() {
        let counts: Vec<u64> = members
            .iter()
            .map(|c| profiles[c.index()].successful_rounds)
            .collect();
        let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
        assert!(
            spread <= bound,
            "criterion 6 FAIL: tier {k} spread {spread} > {bound} ({counts:?})"
        );
    }
    println!("criterion 6 PASS: ct spread within every tier <= {bound} after 1000 rounds");
}

#[test]
fn c07_time_to_target_trend() {
    let mut dct_times = Vec::new();
    let mut avg_times = Vec::new();
    for &seed in &SEED_PANEL {
        let base = SimConfig {
            seed,
            ..default_config()
        };
        let dct = run_summary(&SimConfig {
            strategy: StrategyKind::FedDct,
            ..base.clone()
        });
        let avg = run_summary(&SimConfig {
            strategy: StrategyKind::FedAvg,
            ..base
        });
        dct_times.push(dct.time_to_target_s.unwrap_or(f64::INFINITY));
        avg_times.push(avg.time_to_target_s.unwrap_or(f64::INFINITY));
    }
    let dct = median(dct_times.clone());
    let avg = median(avg_times.clone());
    assert!(
        dct.is_finite() && avg.is_finite(),
        "criterion 7 FAIL: target unreachable (dct {dct_times:?}, avg {avg_times:?})"
    );
    let reduction = 1.0 - dct / avg;
    assert!(
        reduction >= 0.30,
        "criterion 7 FAIL: median time-to-target reduction {:.1}% (dct {dct:.1} s vs fedavg {avg:.1} s)",
        reduction * 100.0
    );
    println!(
        "criterion 7 PASS: median time-to-target {dct:.1} s vs {avg:.1} s ({:.1}% reduction, >= 30% required)",
        reduction * 100.0
    );
}

#[test]
fn c08_final_accuracy_trend() {
    let mut best = [Vec::new(), Vec::new(), Vec::new()];
    for &seed in &SEED_PANEL {
        let base = SimConfig {
            seed,
            ..default_config()
        };
        for (i, strategy) in [StrategyKind::FedDct, StrategyKind::FedAvg, StrategyKind::Tifl]
            .into_iter()
            .enumerate()
        {
            let summary = run_summary(&SimConfig {
                strategy,
                ..base.clone()
            });
            best[i].push(summary.best_accuracy);
        }
    }
    let dct = median(best[0].clone());
    let avg = median(best[1].clone());
    let tifl = median(best[2].clone());
    let pass = dct >= avg - 0.005 && dct >= tifl;
    println!(
        "criterion 8 {}: median best accuracy feddct {dct:.4} vs fedavg {avg:.4} (need >= {:.4}) and tifl {tifl:.4}",
        if pass { "PASS" } else { "FAIL" },
        avg - 0.005
    );
    assert!(
        pass,
        "criterion 8 FAIL: feddct {dct:.4} vs fedavg {avg:.4} - 0.005 and tifl {tifl:.4}"
    );
}

#[test]
fn c09_mu_robustness_trend() {
    let mut ratios = Vec::new();
    for strategy in [StrategyKind::FedDct, StrategyKind::FedAvg] {
        let baseline = median_time_over_seeds(strategy, 0.0);
        assert!(baseline.is_finite(), "criterion 9 FAIL: {strategy:?} never reaches target at mu=0");
        let per_mu: Vec<f64> = [0.2, 0.4]
            .iter()
            .map(|&mu| {
                let t = median_time_over_seeds(strategy, mu);
                assert!(
                    t.is_finite(),
                    "criterion 9 FAIL: {strategy:?} never reaches target at mu={mu}"
                );
                t / baseline
            })
            .collect();
        ratios.push(per_mu);
    }
    let (dct, avg) = (&ratios[0], &ratios[1]);
    for (i, mu) in [0.2, 0.4].iter().enumerate() {
        assert!(
            dct[i] < avg[i],
            "criterion 9 FAIL: at mu={mu} feddct degraded {:.2}x vs fedavg {:.2}x",
            dct[i],
            avg[i]
        );
    }
    println!(
        "criterion 9 PASS: time-to-target degradation feddct {:.2}x/{:.2}x vs fedavg {:.2}x/{:.2}x at mu=0.2/0.4",
        dct[0], dct[1], avg[0], avg[1]
    );
}

#[test]
fn c10_tier_trajectory_trend() {
    let reports = engine::run(&default_config()).unwrap().reports;
    let quarter = reports.len() / 4;
    let mean_tier = |rs: &[RoundReport]| {
        rs.iter().map(|r| r.selected_tier as f64).sum::<f64>() / rs.len() as f64
    };
    let first = mean_tier(&reports[..quarter]);
    let last = mean_tier(&reports[reports.len() - quarter..]);
    assert!(
        last > first,
        "criterion 10 FAIL: mean selected tier {first:.2} (first quartile) vs {last:.2} (last quartile)"
    );
    println!("criterion 10 PASS: mean selected tier rises from {first:.2} to {last:.2}");
}

#[test]
fn c11_degenerate_configs() {
    // Guaranteed-failure delays stall training without crashing.
    let stall_config = SimConfig {
        mu: 1.0,
        ..default_config()
    };
    assert!(stall_config.straggler_delay_range_s[0] >= stall_config.omega_s);
    let reports = engine::run(&stall_config).unwrap().reports;
    assert_eq!(reports.len() as u32, stall_config.rounds, "full schedule, no crash");
    let initial = reports[0].accuracy;
    assert!(
        reports.iter().all(|r| r.accuracy == initial),
        "criterion 11 FAIL: training should stall"
    );
    assert!(
        reports.iter().all(|r| r.completed.is_empty()),
        "criterion 11 FAIL: nothing can complete within the timeout"
    );

    // A single tier turns the scheme into tau-client selection with a
    // timeout cap; a paired uniform-selection run on the same seed has no
    // cap at all.
    let single_tier = SimConfig {
        num_tiers: 1,
        tau: 5,
        ..default_config()
    };
    let dct = engine::run(&single_tier).unwrap().reports;
    let avg = engine::run(&SimConfig {
        strategy: StrategyKind::FedAvg,
        ..single_tier.clone()
    })
    .unwrap()
    .reports;
    for report in &dct {
        assert_eq!(report.selected_tier, 1, "single tier");
        assert!(report.dmax_per_tier_s.len() <= 1);
        let pool: usize = report.tier_membership.iter().map(|t| t.len()).sum();
        if pool >= single_tier.tau as usize {
            assert_eq!(report.participants.len(), single_tier.tau as usize);
        }
        assert!(
            report.duration_s <= single_tier.omega_s + 1e-9,
            "criterion 11 FAIL: capped duration exceeded omega"
        );
    }
    let uncapped = avg.iter().map(|r| r.duration_s).fold(0.0, f64::max);
    assert!(
        uncapped > single_tier.omega_s,
        "criterion 11 FAIL: the uniform baseline should exceed omega somewhere (max {uncapped})"
    );
    println!(
        "criterion 11 PASS: mu=1 stalls gracefully; M=1 behaves as tau-client selection capped at omega"
    );
}
