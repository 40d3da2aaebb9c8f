//! Virtual-clock orchestration of full training runs.
//!
//! Each strategy implements [`Strategy`] and is picked out of the
//! registry by its config token. All reported times are virtual seconds
//! advanced by round durations; nothing here touches the wall clock or a
//! network.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::client::{ClientId, ClientProfile};
use crate::config::{ConfigError, SimConfig, StrategyKind};
use crate::dataset::{self, ClientShard, Dataset, DatasetError};
use crate::latency::{assign_groups, LatencyError, LatencyModel, SampleKey, TimeSample};
use crate::model::{self, ModelError, ModelState};
use crate::rng::{RngStreams, StreamName};
use crate::tiering;

mod fedasync;
mod fedavg;
mod feddct;
mod tifl;

pub use fedasync::FedAsyncStrategy;
pub use fedavg::FedAvgStrategy;
pub use feddct::FedDctStrategy;
pub use tifl::TiflStrategy;

/// Staleness weighting for the asynchronous baseline. The merge weight is
/// `FEDASYNC_ALPHA_BASE * (staleness + 1)^-0.5`.
pub const FEDASYNC_ALPHA_BASE: f64 = 0.6;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What kind of pending event fires; the rank also breaks time ties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// One re-evaluation training of a timed-out client finished.
    EvaluationStep { draw_s: f64 },
    /// An asynchronous client finished local training.
    AsyncCompletion,
}

impl EventKind {
    fn rank(self) -> u8 {
        match self {
            EventKind::EvaluationStep { .. } => 0,
            EventKind::AsyncCompletion => 1,
        }
    }
}

/// A scheduled occurrence on the virtual clock.
#[derive(Debug, Clone)]
pub struct SimEvent {
    pub time_s: f64,
    pub kind: EventKind,
    pub client: ClientId,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time_s
            .total_cmp(&other.time_s)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.client.cmp(&other.client))
    }
}

/// Monotone simulated clock with an ordered queue of pending events.
/// Ties fire in (time, event kind, client id) order.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now_s: f64,
    pending: BinaryHeap<std::cmp::Reverse<SimEvent>>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now_s(&self) -> f64 {
        self.now_s
    }

    pub fn advance(&mut self, duration_s: f64) {
        assert!(duration_s >= 0.0, "time never decreases");
        self.now_s += duration_s;
    }

    pub fn advance_to(&mut self, time_s: f64) {
        assert!(time_s >= self.now_s, "time never decreases");
        self.now_s = time_s;
    }

    pub fn schedule(&mut self, event: SimEvent) {
        assert!(event.time_s >= self.now_s, "events cannot fire in the past");
        self.pending.push(std::cmp::Reverse(event));
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.pending.peek().map(|e| e.0.time_s)
    }

    /// Pop the next event if it is due at or before the current time.
    pub fn pop_due(&mut self) -> Option<SimEvent> {
        if self.next_event_time()? <= self.now_s {
            self.pending.pop().map(|e| e.0)
        } else {
            None
        }
    }

    /// Pop the next event regardless of time (the caller jumps the clock).
    pub fn pop_next(&mut self) -> Option<SimEvent> {
        self.pending.pop().map(|e| e.0)
    }
}

/// One row per global round.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: u32,
    /// Virtual time when the round finished, seconds since run start.
    pub virtual_time_s: f64,
    pub strategy: StrategyKind,
    /// 1-based selected tier (the pointer for cross-tier selection);
    /// 0 for untriered strategies.
    pub selected_tier: u32,
    pub participants: Vec<ClientId>,
    pub completed: Vec<ClientId>,
    pub timed_out: Vec<ClientId>,
    /// Timeout thresholds used this round, one per tier up to the pointer.
    pub dmax_per_tier_s: Vec<f64>,
    /// Test accuracy of the global model at the end of the round.
    pub accuracy: f64,
    pub duration_s: f64,
    /// Tier membership snapshot this round (empty for untriered
    /// strategies).
    pub tier_membership: Vec<Vec<ClientId>>,
}

/// Round duration from per-tier completion times.
///
/// Each tier waits for its slowest selected client, capped by the tier's
/// threshold and the maximum timeout; the round lasts as long as the
/// slowest tier. Tiers with no selected clients are skipped.
pub fn round_duration(times_per_tier: &[Vec<f64>], thresholds_s: &[f64], omega_s: f64) -> f64 {
    assert_eq!(times_per_tier.len(), thresholds_s.len());
    let mut duration = f64::NEG_INFINITY;
    for (times, &cap) in times_per_tier.iter().zip(thresholds_s) {
        if times.is_empty() {
            continue;
        }
        let slowest = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        duration = duration.max(slowest.min(cap).min(omega_s));
    }
    assert!(duration.is_finite(), "at least one tier must have participants");
    duration
}

/// Options beyond the config document.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Charge the initial profiling waves to the virtual clock (default).
    pub charge_startup_time: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            charge_startup_time: true,
        }
    }
}

/// Everything a strategy needs, prepared once per run. Dataset, shards
/// and latency draws depend only on the seed, never on the strategy.
pub struct SimEnv {
    pub config: SimConfig,
    pub options: RunOptions,
    pub streams: RngStreams,
    pub dataset: Dataset,
    pub shards: Vec<ClientShard>,
    pub latency: LatencyModel,
    pub latency_groups: Vec<usize>,
}

impl SimEnv {
    pub fn prepare(config: &SimConfig) -> Result<Self, EngineError> {
        Self::prepare_with(config, RunOptions::default())
    }

    pub fn prepare_with(config: &SimConfig, options: RunOptions) -> Result<Self, EngineError> {
        let config = config.clone().validate()?;
        let streams = RngStreams::new(config.seed);

        let mut partition_rng = streams.stream(StreamName::Partition);
        let dataset = dataset::generate_synthetic(
            dataset::NUM_CLASSES,
            dataset::NUM_FEATURES,
            dataset::TRAIN_PER_CLASS,
            &mut partition_rng,
        );
        let shards = dataset::partition(
            &dataset,
            config.num_clients,
            config.noniid_fraction,
            &mut partition_rng,
        )?;

        let latency = LatencyModel::from_config(&config);
        let mut group_rng = streams.stream(StreamName::Latency);
        let latency_groups = assign_groups(
            config.num_clients,
            config.base_delay_means_s.len(),
            &mut group_rng,
        )?;

        Ok(Self {
            config,
            options,
            streams,
            dataset,
            shards,
            latency,
            latency_groups,
        })
    }

    pub fn num_clients(&self) -> usize {
        self.config.num_clients as usize
    }

    pub fn client_ids(&self) -> impl Iterator<Item = ClientId> {
        (0..self.config.num_clients).map(ClientId)
    }

    /// Training time of a client for the given key; identical across
    /// strategies on the same seed.
    pub fn training_time(&self, client: ClientId, key: SampleKey) -> TimeSample {
        self.latency
            .sample(&self.streams, client, self.latency_groups[client.index()], key)
    }

    /// Fresh global model from the model-init stream.
    pub fn init_model(&self) -> ModelState {
        let mut rng = self.streams.stream(StreamName::ModelInit);
        model::init_model(self.dataset.num_classes, self.dataset.num_features, &mut rng)
    }

    pub fn evaluate(&self, model: &ModelState) -> f64 {
        model::evaluate(model, &self.dataset, self.dataset.test_indices())
    }

    /// Local training of one participant, batch order keyed by
    /// `(client, order_key)`.
    pub fn train_participant(
        &self,
        global: &ModelState,
        client: ClientId,
        order_key: u64,
    ) -> Result<(ModelState, u64), EngineError> {
        let shard = &self.shards[client.index()];
        let mut rng = self
            .streams
            .keyed(StreamName::BatchOrder, &[client.0 as u64, order_key]);
        let update = model::train_client(
            global,
            &self.dataset,
            shard,
            self.config.local_epochs,
            self.config.batch_size,
            self.config.learning_rate,
            &mut rng,
        )?;
        Ok((update, shard.num_samples()))
    }

    /// Run the initial profiling waves: every client trains `kappa` times
    /// in parallel, each wave costing its slowest draw. Returns the
    /// profiles (dropout rule applied) and the clock charge.
    pub fn profile_clients(&self) -> (Vec<ClientProfile>, f64) {
        let (profiles, wave_max) = tiering::profile_clients(
            &self.latency_groups,
            self.config.kappa,
            self.config.omega_s,
            |client, wave| {
                self.training_time(client, SampleKey::Profiling { wave }).total_s
            },
        );
        let elapsed: f64 = wave_max.iter().sum();
        let charged = if self.options.charge_startup_time {
            elapsed
        } else {
            0.0
        };
        (profiles, charged)
    }
}

/// A complete training run produced by one strategy.
pub struct RunOutput {
    pub reports: Vec<RoundReport>,
    pub final_model: ModelState,
}

/// One orchestration scheme behind a common interface.
pub trait Strategy: Sync {
    fn kind(&self) -> StrategyKind;
    fn run(&self, env: &SimEnv) -> Result<RunOutput, EngineError>;
}

static FEDDCT: FedDctStrategy = FedDctStrategy;
static FEDAVG: FedAvgStrategy = FedAvgStrategy;
static TIFL: TiflStrategy = TiflStrategy;
static FEDASYNC: FedAsyncStrategy = FedAsyncStrategy::new();

/// Every registered strategy.
pub fn registry() -> [&'static dyn Strategy; 4] {
    [&FEDDCT, &FEDAVG, &TIFL, &FEDASYNC]
}

/// Look a strategy up by kind.
pub fn strategy_for(kind: StrategyKind) -> &'static dyn Strategy {
    registry()
        .into_iter()
        .find(|s| s.kind() == kind)
        .expect("all strategy kinds registered")
}

/// Prepare the environment and run the configured strategy.
pub fn run(config: &SimConfig) -> Result<RunOutput, EngineError> {
    run_with(config, RunOptions::default())
}

pub fn run_with(config: &SimConfig, options: RunOptions) -> Result<RunOutput, EngineError> {
    let env = SimEnv::prepare_with(config, options)?;
    strategy_for(env.config.strategy).run(&env)
}

/// Run the dynamic cross-tier scheme regardless of the config's strategy
/// field.
pub fn run_feddct(config: &SimConfig) -> Result<Vec<RoundReport>, EngineError> {
    run_as(config, StrategyKind::FedDct)
}

pub fn run_fedavg(config: &SimConfig) -> Result<Vec<RoundReport>, EngineError> {
    run_as(config, StrategyKind::FedAvg)
}

pub fn run_tifl(config: &SimConfig) -> Result<Vec<RoundReport>, EngineError> {
    run_as(config, StrategyKind::Tifl)
}

pub fn run_fedasync(config: &SimConfig) -> Result<Vec<RoundReport>, EngineError> {
    run_as(config, StrategyKind::FedAsync)
}

fn run_as(config: &SimConfig, kind: StrategyKind) -> Result<Vec<RoundReport>, EngineError> {
    let mut config = config.clone();
    config.strategy = kind;
    Ok(run(&config)?.reports)
}

/// Sort updates by client id and aggregate, so the result is independent
/// of dispatch order.
pub(crate) fn aggregate_in_id_order(
    mut updates: Vec<(ClientId, ModelState, u64)>,
) -> Result<ModelState, ModelError> {
    updates.sort_by_key(|(id, _, _)| *id);
    let pairs: Vec<(ModelState, u64)> = updates
        .into_iter()
        .map(|(_, model, samples)| (model, samples))
        .collect();
    model::aggregate(&pairs)
}
