//! Dynamic cross-tier orchestration: per-round re-tiering, accuracy-driven
//! tier pointer movement, fairness-weighted selection, per-tier timeout
//! thresholds, and asynchronous re-evaluation of timed-out clients.

use crate::client::ClientId;
use crate::config::StrategyKind;
use crate::latency::SampleKey;
use crate::selection::{self, SelectionState};
use crate::tiering;

use super::{
    aggregate_in_id_order, round_duration, EngineError, EventKind, RoundReport, RunOutput,
    SimEnv, SimEvent, Strategy, VirtualClock,
};

pub struct FedDctStrategy;

impl Strategy for FedDctStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::FedDct
    }

    fn run(&self, env: &SimEnv) -> Result<RunOutput, EngineError> {
        let cfg = &env.config;
        let clients_per_tier = cfg.clients_per_tier() as usize;

        let (mut profiles, startup_s) = env.profile_clients();
        let mut clock = VirtualClock::new();
        clock.advance(startup_s);

        let mut global = env.init_model();
        // Accuracy of the model entering the current round, and the one
        // before it. The run starts from upsilon_0 = 0, so the first
        // comparison sees the initial model's accuracy against zero.
        let mut acc_entering = env.evaluate(&global);
        let mut acc_before = 0.0;
        let mut selection_state = SelectionState::new();
        let mut selection_rng = env.streams.stream(crate::rng::StreamName::Selection);

        let mut reports = Vec::with_capacity(cfg.rounds as usize);
        for round in 1..=cfg.rounds {
            // Finalize evaluation trainings that completed before now;
            // reinstated clients are tier-eligible again from this round.
            while let Some(event) = clock.pop_due() {
                let EventKind::EvaluationStep { draw_s } = event.kind else {
                    unreachable!("only evaluation steps are scheduled");
                };
                tiering::apply_evaluation_step(
                    &mut profiles[event.client.index()],
                    draw_s,
                    cfg.kappa,
                    cfg.omega_s,
                );
            }

            let table = tiering::tier_active(&profiles, clients_per_tier);
            let tier_pointer = selection::move_tier(
                selection_state.tier_pointer,
                acc_entering,
                acc_before,
                cfg.num_tiers,
            );
            selection_state.tier_pointer = tier_pointer;
            let thresholds =
                selection::compute_thresholds(&table, cfg.beta, cfg.omega_s, tier_pointer);

            let participants = match selection::select_participants(
                &table,
                tier_pointer,
                &profiles,
                cfg.tau,
                &mut selection_rng,
            ) {
                Ok(p) => p,
                Err(_) => {
                    // Nobody eligible: idle until the next re-evaluation
                    // completes (or a full timeout window when none is
                    // pending) and log the degenerate round.
                    let now = clock.now_s();
                    let duration = clock
                        .next_event_time()
                        .map(|t| t - now)
                        .unwrap_or(cfg.omega_s);
                    clock.advance(duration);
                    acc_before = acc_entering;
                    reports.push(RoundReport {
                        round,
                        virtual_time_s: clock.now_s(),
                        strategy: self.kind(),
                        selected_tier: tier_pointer,
                        participants: Vec::new(),
                        completed: Vec::new(),
                        timed_out: Vec::new(),
                        dmax_per_tier_s: thresholds,
                        accuracy: acc_entering,
                        duration_s: duration,
                        tier_membership: table.tiers().to_vec(),
                    });
                    continue;
                }
            };

            let round_start = clock.now_s();
            let mut times_per_tier: Vec<Vec<f64>> = vec![Vec::new(); thresholds.len()];
            let mut completed: Vec<ClientId> = Vec::new();
            let mut timed_out: Vec<ClientId> = Vec::new();
            let mut updates = Vec::new();
            for &client in &participants {
                let tier = table.tier_of(client).expect("participants are tiered");
                let train_time = env
                    .training_time(client, SampleKey::Round { round })
                    .total_s;
                times_per_tier[tier].push(train_time);
                if train_time >= thresholds[tier] {
                    // Too slow for its tier: drop the result and move the
                    // client into the parallel evaluation program,
                    // starting the moment the server gives up on it.
                    timed_out.push(client);
                    tiering::begin_reevaluation(&mut profiles[client.index()], cfg.kappa);
                    let mut completes_at = round_start + thresholds[tier];
                    for step in 0..cfg.kappa {
                        let draw = env
                            .training_time(client, SampleKey::Reevaluation { round, step })
                            .total_s;
                        completes_at += draw;
                        clock.schedule(SimEvent {
                            time_s: completes_at,
                            kind: EventKind::EvaluationStep { draw_s: draw },
                            client,
                        });
                    }
                } else {
                    completed.push(client);
                    tiering::update_profile(&mut profiles[client.index()], train_time);
                    let (update, samples) = env.train_participant(&global, client, round as u64)?;
                    updates.push((client, update, samples));
                }
            }

            let duration = round_duration(&times_per_tier, &thresholds, cfg.omega_s);
            acc_before = acc_entering;
            if !updates.is_empty() {
                let mut aggregated = aggregate_in_id_order(updates)?;
                aggregated.round_produced = round;
                global = aggregated;
                acc_entering = env.evaluate(&global);
            }
            // On an all-timeout round the model and accuracy carry over
            // unchanged; the next pointer move sees equal accuracies.

            clock.advance(duration);
            reports.push(RoundReport {
                round,
                virtual_time_s: clock.now_s(),
                strategy: self.kind(),
                selected_tier: tier_pointer,
                participants,
                completed,
                timed_out,
                dmax_per_tier_s: thresholds,
                accuracy: acc_entering,
                duration_s: duration,
                tier_membership: table.tiers().to_vec(),
            });
        }

        Ok(RunOutput {
            reports,
            final_model: global,
        })
    }
}
