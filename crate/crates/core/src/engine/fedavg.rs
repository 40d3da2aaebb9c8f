//! Synchronous baseline: uniform random selection, a full barrier on the
//! slowest participant, sample-weighted averaging. No timeout mechanism.

use crate::client::ClientId;
use crate::config::StrategyKind;
use crate::latency::SampleKey;
use crate::rng::StreamName;

use super::{
    aggregate_in_id_order, EngineError, RoundReport, RunOutput, SimEnv, Strategy, VirtualClock,
};

pub struct FedAvgStrategy;

/// Uniform draw of `count` distinct clients, ascending.
pub(crate) fn pick_uniform(
    num_clients: usize,
    count: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<ClientId> {
    let mut picked: Vec<ClientId> = rand::seq::index::sample(rng, num_clients, count.min(num_clients))
        .iter()
        .map(|i| ClientId(i as u32))
        .collect();
    picked.sort_unstable();
    picked
}

impl Strategy for FedAvgStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::FedAvg
    }

    fn run(&self, env: &SimEnv) -> Result<RunOutput, EngineError> {
        let cfg = &env.config;
        // Profiling is charged to every strategy equally so time-to-accuracy
        // comparisons include startup cost; the profiles themselves play no
        // role in uniform selection.
        let (_profiles, startup_s) = env.profile_clients();
        let mut clock = VirtualClock::new();
        clock.advance(startup_s);

        let mut global = env.init_model();
        let mut selection_rng = env.streams.stream(StreamName::Selection);

        let mut reports = Vec::with_capacity(cfg.rounds as usize);
        for round in 1..=cfg.rounds {
            let participants = pick_uniform(env.num_clients(), cfg.tau as usize, &mut selection_rng);

            // The server waits for everyone it selected.
            let mut duration = 0.0f64;
            let mut updates = Vec::with_capacity(participants.len());
            for &client in &participants {
                let train_time = env.training_time(client, SampleKey::Round { round }).total_s;
                duration = duration.max(train_time);
                let (update, samples) = env.train_participant(&global, client, round as u64)?;
                updates.push((client, update, samples));
            }

            let mut aggregated = aggregate_in_id_order(updates)?;
            aggregated.round_produced = round;
            global = aggregated;
            let accuracy = env.evaluate(&global);

            clock.advance(duration);
            reports.push(RoundReport {
                round,
                virtual_time_s: clock.now_s(),
                strategy: self.kind(),
                selected_tier: 0,
                participants: participants.clone(),
                completed: participants,
                timed_out: Vec::new(),
                dmax_per_tier_s: Vec::new(),
                accuracy,
                duration_s: duration,
                tier_membership: Vec::new(),
            });
        }

        Ok(RunOutput {
            reports,
            final_model: global,
        })
    }
}
