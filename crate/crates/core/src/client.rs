//! Per-client bookkeeping shared by every strategy.

use std::fmt;

/// Index of a client in the simulated pool (`0..num_clients`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClientId(pub u32);

impl ClientId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Availability of a client from the server's point of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClientState {
    /// Eligible for tiering and selection.
    Active,
    /// Timed out and currently running evaluation trainings whose results
    /// are not aggregated; ineligible for selection until they finish.
    UnderEvaluation {
        rounds_remaining: u32,
        accumulated_s: f64,
    },
    /// Dropped for the rest of the run (average training time reached the
    /// maximum timeout). Absorbing within one run.
    Excluded,
}

/// Server-side profile of one client.
#[derive(Debug, Clone)]
pub struct ClientProfile {
    pub id: ClientId,
    /// Historic average training time, seconds.
    pub avg_time_s: f64,
    /// Number of rounds this client completed within its threshold.
    pub successful_rounds: u64,
    pub state: ClientState,
    /// Index into the latency model's group means.
    pub latency_group: usize,
}

impl ClientProfile {
    pub fn is_active(&self) -> bool {
        self.state == ClientState::Active
    }
}
