//! Cross-strategy behavior of full engine runs.

use feddct_core::client::ClientId;
use feddct_core::config::{MasterFraction, SimConfig, StrategyKind};
use feddct_core::engine::{self, FedAsyncStrategy, RoundReport, SimEnv, Strategy};
use feddct_core::latency::SampleKey;
use feddct_core::model::train_client;
use feddct_core::rng::StreamName;

fn quick_config() -> SimConfig {
    SimConfig {
        rounds: 60,
        ..SimConfig::default()
    }
}

fn run_kind(config: &SimConfig, kind: StrategyKind) -> Vec<RoundReport> {
    let mut config = config.clone();
    config.strategy = kind;
    engine::run(&config).unwrap().reports
}

#[test]
fn runs_are_deterministic_at_report_level() {
    for kind in StrategyKind::ALL {
        let config = quick_config();
        let a = run_kind(&config, kind);
        let b = run_kind(&config, kind);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.accuracy, y.accuracy, "{kind:?}");
            assert_eq!(x.virtual_time_s, y.virtual_time_s, "{kind:?}");
            assert_eq!(x.participants, y.participants, "{kind:?}");
            assert_eq!(x.timed_out, y.timed_out, "{kind:?}");
        }
    }
}

#[test]
fn virtual_time_is_monotone_for_every_strategy() {
    for kind in StrategyKind::ALL {
        let reports = run_kind(&quick_config(), kind);
        let mut last = 0.0;
        for report in &reports {
            assert!(report.duration_s > 0.0, "{kind:?} round {}", report.round);
            assert!(
                report.virtual_time_s >= last,
                "{kind:?} round {} went backwards",
                report.round
            );
            last = report.virtual_time_s;
        }
    }
}

#[test]
fn participants_split_into_completed_and_timed_out() {
    for kind in StrategyKind::ALL {
        for report in run_kind(&quick_config(), kind) {
            let mut together: Vec<ClientId> = report
                .completed
                .iter()
                .chain(&report.timed_out)
                .copied()
                .collect();
            together.sort_unstable();
            assert_eq!(together, report.participants, "{kind:?} round {}", report.round);
            for c in &report.timed_out {
                assert!(!report.completed.contains(c), "disjoint sets");
            }
        }
    }
}

#[test]
fn same_seed_pairs_dataset_shards_and_latency_across_strategies() {
    let config = quick_config();
    let envs: Vec<SimEnv> = StrategyKind::ALL
        .iter()
        .map(|&kind| {
            let mut c = config.clone();
            c.strategy = kind;
            SimEnv::prepare(&c).unwrap()
        })
        .collect();
    let reference = &envs[0];
    for env in &envs[1..] {
        assert_eq!(
            reference.dataset.train_indices(),
            env.dataset.train_indices()
        );
        for (a, b) in reference.shards.iter().zip(&env.shards) {
            assert_eq!(a.samples, b.samples);
            assert_eq!(a.master_class, b.master_class);
        }
        assert_eq!(reference.latency_groups, env.latency_groups);
        for client in reference.client_ids() {
            for round in [1u32, 7, 33] {
                let key = SampleKey::Round { round };
                assert_eq!(
                    reference.training_time(client, key),
                    env.training_time(client, key)
                );
            }
        }
    }
}

#[test]
fn profiling_time_is_charged_equally() {
    // The virtual time before the first round's duration is the profiling
    // charge; it must match across strategies on the same seed.
    let config = quick_config();
    let offsets: Vec<f64> = StrategyKind::ALL
        .iter()
        .map(|&kind| {
            let first = &run_kind(&config, kind)[0];
            first.virtual_time_s - first.duration_s
        })
        .collect();
    for offset in &offsets[1..] {
        assert!((offset - offsets[0]).abs() < 1e-9, "{offsets:?}");
    }
    assert!(offsets[0] > 0.0, "profiling must cost time");
}

#[test]
fn feddct_matches_fedavg_without_stragglers_or_heterogeneity() {
    // Homogeneous latencies and no failures: the schemes differ only in
    // how they pick clients, so they converge to the same place.
    let config = SimConfig {
        mu: 0.0,
        base_delay_means_s: vec![10.0, 10.0, 10.0, 10.0, 10.0],
        rounds: 200,
        ..SimConfig::default()
    };
    let dct = run_kind(&config, StrategyKind::FedDct);
    let avg = run_kind(&config, StrategyKind::FedAvg);
    let final_dct = dct.last().unwrap().accuracy;
    let final_avg = avg.last().unwrap().accuracy;
    assert!(
        (final_dct - final_avg).abs() <= 0.02,
        "final accuracies {final_dct} vs {final_avg}"
    );
}

#[test]
fn feddct_stalls_gracefully_when_everyone_always_fails() {
    let config = SimConfig {
        mu: 1.0,
        rounds: 40,
        ..quick_config()
    };
    let reports = run_kind(&config, StrategyKind::FedDct);
    assert_eq!(reports.len(), 40, "no crash, full schedule");
    let first = reports[0].accuracy;
    assert!(reports.iter().all(|r| r.accuracy == first), "accuracy never moves");
    assert!(
        reports.iter().all(|r| r.participants.is_empty()),
        "every profiling draw hit the failure delay, so nobody survives the dropout rule"
    );
}

#[test]
fn feddct_durations_respect_thresholds_and_omega() {
    let config = quick_config();
    for report in run_kind(&config, StrategyKind::FedDct) {
        if report.participants.is_empty() {
            continue;
        }
        assert!(report.duration_s <= config.omega_s + 1e-9);
        let max_dmax = report
            .dmax_per_tier_s
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            report.duration_s <= max_dmax + 1e-9,
            "round {}: duration {} vs thresholds {:?}",
            report.round,
            report.duration_s,
            report.dmax_per_tier_s
        );
        for d in &report.dmax_per_tier_s {
            assert!(*d <= config.omega_s + 1e-9);
        }
    }
}

#[test]
fn fedavg_has_no_timeout_mechanism() {
    let config = SimConfig {
        rounds: 120,
        ..SimConfig::default()
    };
    let reports = run_kind(&config, StrategyKind::FedAvg);
    assert!(reports.iter().all(|r| r.timed_out.is_empty()));
    assert!(reports.iter().all(|r| r.completed.len() == config.tau as usize));
    // With mu = 0.1 over 120 rounds of 5 clients, some round waits out an
    // injected 30-60 s delay well past omega.
    let slowest = reports.iter().map(|r| r.duration_s).fold(0.0, f64::max);
    assert!(slowest > config.omega_s, "uncapped barrier, got {slowest}");
    // And each round's duration is exactly the slowest selected client.
    let env = SimEnv::prepare(&config).unwrap();
    for report in &reports {
        let expected = report
            .participants
            .iter()
            .map(|&c| env.training_time(c, SampleKey::Round { round: report.round }).total_s)
            .fold(0.0, f64::max);
        assert!((report.duration_s - expected).abs() < 1e-9);
    }
}

#[test]
fn tifl_tiers_are_static_and_profiling_dropouts_never_train() {
    let config = SimConfig {
        rounds: 150,
        ..SimConfig::default()
    };
    let reports = run_kind(&config, StrategyKind::Tifl);
    let first_tiers = &reports[0].tier_membership;
    for report in &reports {
        assert_eq!(&report.tier_membership, first_tiers, "tiering is static");
    }
    // Recompute the profiling dropouts from the pure draws.
    let env = SimEnv::prepare(&config).unwrap();
    let (profiles, _) = env.profile_clients();
    let dropped: Vec<ClientId> = profiles
        .iter()
        .filter(|p| !p.is_active())
        .map(|p| p.id)
        .collect();
    assert!(!dropped.is_empty(), "mu = 0.1 should drop someone at profiling");
    for report in &reports {
        for c in &dropped {
            assert!(!report.participants.contains(c), "dropout {c} selected");
        }
    }
}

#[test]
fn tifl_timed_out_clients_stay_selectable() {
    let config = SimConfig {
        rounds: 200,
        ..SimConfig::default()
    };
    let reports = run_kind(&config, StrategyKind::Tifl);
    let timed_out_once: Vec<ClientId> = reports
        .iter()
        .flat_map(|r| r.timed_out.iter().copied())
        .collect();
    assert!(!timed_out_once.is_empty());
    // No re-evaluation, no exclusion: a timed-out client appears again later.
    let reappears = timed_out_once.iter().any(|c| {
        let first = reports.iter().position(|r| r.timed_out.contains(c)).unwrap();
        reports[first + 1..].iter().any(|r| r.participants.contains(c))
    });
    assert!(reappears, "timed-out clients are dropped for the round, not the run");
}

#[test]
fn fedasync_with_full_weight_is_sequential_sgd() {
    // One client, alpha_base 1: every merge replaces the global model, so
    // the run is exactly sequential local training.
    let config = SimConfig {
        num_clients: 1,
        num_tiers: 1,
        tau: 1,
        base_delay_means_s: vec![5.0],
        mu: 0.0,
        noniid_fraction: MasterFraction::Iid,
        rounds: 8,
        strategy: StrategyKind::FedAsync,
        ..SimConfig::default()
    };
    let env = SimEnv::prepare(&config).unwrap();
    let strategy = FedAsyncStrategy { alpha_base: 1.0 };
    let output = strategy.run(&env).unwrap();

    let mut expected = env.init_model();
    let merges = config.rounds as u64 * config.tau as u64;
    for training in 1..=merges {
        let mut rng = env.streams.keyed(StreamName::BatchOrder, &[0, training]);
        expected = train_client(
            &expected,
            &env.dataset,
            &env.shards[0],
            config.local_epochs,
            config.batch_size,
            config.learning_rate,
            &mut rng,
        )
        .unwrap();
    }
    assert_eq!(output.final_model.params, expected.params);
}

#[test]
fn fedasync_reports_every_tau_merges() {
    let config = SimConfig {
        rounds: 30,
        strategy: StrategyKind::FedAsync,
        ..SimConfig::default()
    };
    let reports = engine::run(&config).unwrap().reports;
    assert_eq!(reports.len(), 30);
    for report in &reports {
        assert_eq!(report.participants.len(), config.tau as usize);
        assert_eq!(report.completed.len(), config.tau as usize);
        assert!(report.timed_out.is_empty());
        assert_eq!(report.selected_tier, 0);
    }
}

#[test]
fn iid_runs_work_end_to_end() {
    let config = SimConfig {
        noniid_fraction: MasterFraction::Iid,
        rounds: 40,
        ..SimConfig::default()
    };
    for kind in StrategyKind::ALL {
        let reports = run_kind(&config, kind);
        assert_eq!(reports.len(), 40);
        assert!(reports.last().unwrap().accuracy > 0.5, "{kind:?} learns");
    }
}

#[test]
fn excluded_at_profiling_never_participates_in_feddct() {
    let config = SimConfig {
        rounds: 150,
        ..SimConfig::default()
    };
    let env = SimEnv::prepare(&config).unwrap();
    let (profiles, _) = env.profile_clients();
    let dropped: Vec<ClientId> = profiles
        .iter()
        .filter(|p| !p.is_active())
        .map(|p| p.id)
        .collect();
    assert!(!dropped.is_empty());
    for report in run_kind(&config, StrategyKind::FedDct) {
        for c in &dropped {
            assert!(!report.participants.contains(c));
            assert!(!report.tier_membership.iter().flatten().any(|m| m == c));
        }
    }
}
