//! Per-round client training times: stable heterogeneity (per-group
//! Gaussian delays) plus unpredictable straggler events.
//!
//! A draw is a pure function of `(seed, client, key)`, so the training
//! time of client `c` in round `r` is identical no matter which strategy
//! asks for it. Communication time is folded into the single sample.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::client::ClientId;
use crate::config::SimConfig;
use crate::rng::{RngStreams, StreamName};

/// Gaussian tails can go negative; clamp keeps times physical.
pub const MIN_TRAINING_TIME_S: f64 = 0.1;

/// What a training-time draw is for. Each purpose has its own key space
/// so evaluation draws never collide with round draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKey {
    /// Regular training dispatched in a global round.
    Round { round: u32 },
    /// Initial profiling wave.
    Profiling { wave: u32 },
    /// Re-evaluation training after a timeout in `round`.
    Reevaluation { round: u32, step: u32 },
}

impl SampleKey {
    fn to_keys(self, client: ClientId) -> [u64; 4] {
        match self {
            SampleKey::Round { round } => [0, client.0 as u64, round as u64, 0],
            SampleKey::Profiling { wave } => [1, client.0 as u64, wave as u64, 0],
            SampleKey::Reevaluation { round, step } => [2, client.0 as u64, round as u64, step as u64],
        }
    }
}

/// One sampled training time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSample {
    pub total_s: f64,
    pub base_s: f64,
    /// Whether a failure delay was injected into this draw.
    pub straggler: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatencyError {
    #[error("{clients} clients cannot be divided into {groups} equal latency groups")]
    IndivisibleGroups { clients: u32, groups: usize },
}

#[derive(Debug, Clone)]
pub struct LatencyModel {
    pub group_means_s: Vec<f64>,
    pub stddev_s: f64,
    pub straggler_prob: f64,
    pub straggler_range_s: [f64; 2],
}

impl LatencyModel {
    pub fn from_config(config: &SimConfig) -> Self {
        Self {
            group_means_s: config.base_delay_means_s.clone(),
            stddev_s: config.base_delay_stddev_s,
            straggler_prob: config.mu,
            straggler_range_s: config.straggler_delay_range_s,
        }
    }

    /// Sample the training time of `client` (in latency group `group`)
    /// for the given key. Pure: the same arguments always produce the
    /// same sample.
    pub fn sample(
        &self,
        streams: &RngStreams,
        client: ClientId,
        group: usize,
        key: SampleKey,
    ) -> TimeSample {
        let keys = key.to_keys(client);
        let mean = self.group_means_s[group];
        let normal = Normal::new(mean, self.stddev_s).expect("validated stddev");
        let mut base_rng = streams.keyed(StreamName::Latency, &keys);
        let base_s = normal.sample(&mut base_rng).max(MIN_TRAINING_TIME_S);

        let mut straggler_rng = streams.keyed(StreamName::Straggler, &keys);
        let straggler = straggler_rng.gen_bool(self.straggler_prob);
        let extra = if straggler {
            let [lo, hi] = self.straggler_range_s;
            straggler_rng.gen_range(lo..=hi)
        } else {
            0.0
        };
        TimeSample {
            total_s: base_s + extra,
            base_s,
            straggler,
        }
    }
}

/// Assign clients to equal-size latency groups, drawn once per run.
pub fn assign_groups(
    num_clients: u32,
    num_groups: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<usize>, LatencyError> {
    if num_groups == 0 || !(num_clients as usize).is_multiple_of(num_groups) {
        return Err(LatencyError::IndivisibleGroups {
            clients: num_clients,
            groups: num_groups,
        });
    }
    let per_group = num_clients as usize / num_groups;
    let mut slots: Vec<usize> = (0..num_groups)
        .flat_map(|g| std::iter::repeat_n(g, per_group))
        .collect();
    use rand::seq::SliceRandom;
    slots.shuffle(rng);
    Ok(slots)
}
