//! Asynchronous baseline: every client trains continuously against its
//! latest model snapshot; each arriving update is merged into the global
//! model with a staleness-dependent weight and the client immediately
//! restarts from the new global. A report is emitted every `tau` merges
//! so the accuracy-versus-time curve is comparable to the synchronous
//! strategies.

use crate::client::ClientId;
use crate::config::StrategyKind;
use crate::latency::SampleKey;
use crate::model::{fedasync_merge, ModelState};

use super::{
    EngineError, EventKind, RoundReport, RunOutput, SimEnv, SimEvent, Strategy, VirtualClock,
    FEDASYNC_ALPHA_BASE,
};

pub struct FedAsyncStrategy {
    /// Base merge weight before staleness decay.
    pub alpha_base: f64,
}

impl FedAsyncStrategy {
    pub const fn new() -> Self {
        Self {
            alpha_base: FEDASYNC_ALPHA_BASE,
        }
    }
}

impl Default for FedAsyncStrategy {
    fn default() -> Self {
        Self::new()
    }
}

struct InFlight {
    /// Global version the client's snapshot was taken at.
    started_version: u64,
    snapshot: ModelState,
    /// 1-based index of the training in flight; keys the latency and
    /// batch-order draws.
    training: u32,
}

impl Strategy for FedAsyncStrategy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::FedAsync
    }

    fn run(&self, env: &SimEnv) -> Result<RunOutput, EngineError> {
        let cfg = &env.config;
        let (_profiles, startup_s) = env.profile_clients();
        let mut clock = VirtualClock::new();
        clock.advance(startup_s);

        let mut global = env.init_model();
        let mut version: u64 = 0;

        let mut in_flight: Vec<InFlight> = env
            .client_ids()
            .map(|client| {
                let completion = clock.now_s()
                    + env.training_time(client, SampleKey::Round { round: 1 }).total_s;
                clock.schedule(SimEvent {
                    time_s: completion,
                    kind: EventKind::AsyncCompletion,
                    client,
                });
                InFlight {
                    started_version: 0,
                    snapshot: global.clone(),
                    training: 1,
                }
            })
            .collect();

        let merges_per_report = cfg.tau.max(1);
        let mut merged_since_report: Vec<ClientId> = Vec::new();
        let mut last_report_s = clock.now_s();
        let mut reports = Vec::with_capacity(cfg.rounds as usize);

        while reports.len() < cfg.rounds as usize {
            let event = clock.pop_next().expect("every client always has a pending completion");
            debug_assert_eq!(event.kind, EventKind::AsyncCompletion);
            clock.advance_to(event.time_s);
            let client = event.client;

            let flight = &in_flight[client.index()];
            let (update, _samples) =
                env.train_participant(&flight.snapshot, client, flight.training as u64)?;
            let staleness = version
                .checked_sub(flight.started_version)
                .expect("staleness is never negative");
            global = fedasync_merge(&global, &update, staleness, self.alpha_base);
            version += 1;
            merged_since_report.push(client);

            // Restart immediately from the new global model.
            let next_training = flight.training + 1;
            in_flight[client.index()] = InFlight {
                started_version: version,
                snapshot: global.clone(),
                training: next_training,
            };
            clock.schedule(SimEvent {
                time_s: clock.now_s()
                    + env
                        .training_time(client, SampleKey::Round { round: next_training })
                        .total_s,
                kind: EventKind::AsyncCompletion,
                client,
            });

            if merged_since_report.len() == merges_per_report as usize {
                let accuracy = env.evaluate(&global);
                let mut participants = std::mem::take(&mut merged_since_report);
                participants.sort_unstable();
                let duration = clock.now_s() - last_report_s;
                last_report_s = clock.now_s();
                global.round_produced = reports.len() as u32 + 1;
                reports.push(RoundReport {
                    round: reports.len() as u32 + 1,
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
        }

        Ok(RunOutput {
            reports,
            final_model: global,
        })
    }
}
