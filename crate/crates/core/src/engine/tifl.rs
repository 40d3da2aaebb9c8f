//! Static-tiering baseline: tiers are built once from profiling, clients
//! profiled at or above the maximum timeout are dropped permanently, one
//! tier trains per round, and timed-out clients are discarded from the
//! aggregate without re-evaluation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::client::ClientId;
use crate::config::StrategyKind;
use crate::latency::SampleKey;
use crate::rng::StreamName;
use crate::tiering::{self, TierTable};

use super::{
    aggregate_in_id_order, round_duration, EngineError, RoundReport, RunOutput, SimEnv, Strategy,
    VirtualClock,
};

pub struct TiflStrategy;

/// Floor on a tier's selection weight so a tier at accuracy 1.0 stays
/// reachable.
const MIN_TIER_WEIGHT: f64 = 1e-6;

/// Adaptive tier choice: tiers with lower last-known accuracy weigh more,
/// each selection spends one credit, and once every tier's credits are
/// exhausted they all refill.
pub(crate) fn pick_tier(
    credits: &mut [u32],
    initial_credits: u32,
    tier_accuracy: &[f64],
    table: &TierTable,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let usable: Vec<usize> = (0..table.num_tiers())
        .filter(|&k| !table.tiers()[k].is_empty())
        .collect();
    if usable.is_empty() {
        return None;
    }
    if usable.iter().all(|&k| credits[k] == 0) {
        for k in &usable {
            credits[*k] = initial_credits;
        }
    }
    let eligible: Vec<usize> = usable.into_iter().filter(|&k| credits[k] > 0).collect();
    let weights: Vec<f64> = eligible
        .iter()
        .map(|&k| (1.0 - tier_accuracy[k]).max(MIN_TIER_WEIGHT))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen_range(0.0..total);
    for (&tier, &weight) in eligible.iter().zip(&weights) {
        if draw < weight {
            credits[tier] -= 1;
            return Some(tier);
        }
        draw -= weight;
    }
    // Floating-point edge of the cumulative walk.
    let last = *eligible.last().expect("non-empty");
    credits[last] -= 1;
    Some(last)
}

impl Strategy for TiflStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Tifl
    }

    fn run(&self, env: &SimEnv) -> Result<RunOutput, EngineError> {
        let cfg = &env.config;
        let (profiles, startup_s) = env.profile_clients();
        let mut clock = VirtualClock::new();
        clock.advance(startup_s);

        // Tiers are fixed for the whole run; the dropout from profiling is
        // permanent.
        let table = tiering::tier_active(&profiles, cfg.clients_per_tier() as usize);
        let initial_credits = cfg.rounds.div_ceil(cfg.num_tiers);
        let mut credits = vec![initial_credits; table.num_tiers()];
        let mut tier_accuracy = vec![0.0f64; table.num_tiers()];

        let mut global = env.init_model();
        let mut accuracy = env.evaluate(&global);
        let mut selection_rng = env.streams.stream(StreamName::Selection);

        let mut reports = Vec::with_capacity(cfg.rounds as usize);
        for round in 1..=cfg.rounds {
            let Some(tier) = pick_tier(
                &mut credits,
                initial_credits,
                &tier_accuracy,
                &table,
                &mut selection_rng,
            ) else {
                // Everyone was dropped at profiling; nothing can train.
                clock.advance(cfg.omega_s);
                reports.push(RoundReport {
                    round,
                    virtual_time_s: clock.now_s(),
                    strategy: self.kind(),
                    selected_tier: 0,
                    participants: Vec::new(),
                    completed: Vec::new(),
                    timed_out: Vec::new(),
                    dmax_per_tier_s: Vec::new(),
                    accuracy,
                    duration_s: cfg.omega_s,
                    tier_membership: table.tiers().to_vec(),
                });
                continue;
            };

            let members = &table.tiers()[tier];
            let mut participants: Vec<ClientId> =
                rand::seq::index::sample(&mut selection_rng, members.len(), (cfg.tau as usize).min(members.len()))
                    .iter()
                    .map(|i| members[i])
                    .collect();
            participants.sort_unstable();

            let mut times = Vec::with_capacity(participants.len());
            let mut completed = Vec::new();
            let mut timed_out = Vec::new();
            let mut updates = Vec::new();
            for &client in &participants {
                let train_time = env.training_time(client, SampleKey::Round { round }).total_s;
                times.push(train_time);
                if train_time >= cfg.omega_s {
                    timed_out.push(client);
                } else {
                    completed.push(client);
                    let (update, samples) = env.train_participant(&global, client, round as u64)?;
                    updates.push((client, update, samples));
                }
            }
            let duration = round_duration(&[times], &[cfg.omega_s], cfg.omega_s);

            if !updates.is_empty() {
                let mut aggregated = aggregate_in_id_order(updates)?;
                aggregated.round_produced = round;
                global = aggregated;
                accuracy = env.evaluate(&global);
            }
            tier_accuracy[tier] = accuracy;

            clock.advance(duration);
            reports.push(RoundReport {
                round,
                virtual_time_s: clock.now_s(),
                strategy: self.kind(),
                selected_tier: tier as u32 + 1,
                participants,
                completed,
                timed_out,
                dmax_per_tier_s: Vec::new(),
                accuracy,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStreams;
    use crate::tiering::tier;

    #[test]
    fn credit_exhaustion_resets_and_never_starves() {
        let at: Vec<(ClientId, f64)> = (0..20).map(|i| (ClientId(i), i as f64 + 1.0)).collect();
        let table = tier(&at, 5);
        let initial = 3;
        let mut credits = vec![initial; table.num_tiers()];
        let tier_accuracy = vec![0.4, 0.5, 0.6, 0.7];
        let streams = RngStreams::new(3);
        let mut rng = streams.stream(StreamName::Selection);
        let mut picks = vec![0u32; table.num_tiers()];
        for _ in 0..10_000 {
            let k = pick_tier(&mut credits, initial, &tier_accuracy, &table, &mut rng)
                .expect("tiers are non-empty, selection must never starve");
            picks[k] += 1;
        }
        assert!(picks.iter().all(|&p| p > 0), "every tier gets picked: {picks:?}");
    }

    #[test]
    fn fresh_credits_favor_low_accuracy_tiers() {
        let at: Vec<(ClientId, f64)> = (0..20).map(|i| (ClientId(i), i as f64 + 1.0)).collect();
        let table = tier(&at, 5);
        let tier_accuracy = vec![0.4, 0.5, 0.6, 0.7];
        let streams = RngStreams::new(3);
        let mut rng = streams.stream(StreamName::Selection);
        let mut picks = vec![0u32; table.num_tiers()];
        for _ in 0..10_000 {
            // Refill every trial so the credit budget never gates the draw.
            let mut credits = vec![3; table.num_tiers()];
            let k = pick_tier(&mut credits, 3, &tier_accuracy, &table, &mut rng).unwrap();
            picks[k] += 1;
        }
        // Weights are 0.6 : 0.5 : 0.4 : 0.3.
        assert!(picks[0] > picks[1] && picks[1] > picks[2] && picks[2] > picks[3], "{picks:?}");
    }

    #[test]
    fn empty_table_yields_no_tier() {
        let table = tier(&[], 5);
        let streams = RngStreams::new(3);
        let mut rng = streams.stream(StreamName::Selection);
        assert_eq!(pick_tier(&mut [], 3, &[], &table, &mut rng), None);
    }
}
