//! Cross-tier client selection and per-tier timeout thresholds.
//!
//! The tier pointer moves down (toward faster tiers) while accuracy keeps
//! improving and up when it drops. Participants come from every tier up
//! to the pointer; within a tier the selection weights are each client's
//! successful-round count over the tier total, and the `tau` clients with
//! the smallest weights win, ties broken uniformly at random. Thresholds
//! are the tier's mean profiled time scaled by `beta` and capped at
//! `omega`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::client::{ClientId, ClientProfile};
use crate::tiering::TierTable;

/// Tier pointers are 1-based; runs start from the fastest tier.
pub const INITIAL_TIER_POINTER: u32 = 1;

/// Mutable selection state carried across rounds.
#[derive(Debug, Clone)]
pub struct SelectionState {
    /// Current tier pointer in `[1, num_tiers]`.
    pub tier_pointer: u32,
    /// Accuracy of the model entering the previous round.
    pub prev_accuracy: f64,
}

impl SelectionState {
    pub fn new() -> Self {
        Self {
            tier_pointer: INITIAL_TIER_POINTER,
            prev_accuracy: 0.0,
        }
    }
}

impl Default for SelectionState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("no eligible clients in tiers 1..={0}")]
    EmptyRound(u32),
}

/// Move the tier pointer from the accuracy change, clamped to
/// `[1, num_tiers]`: improvement (or a tie) steps toward tier 1, a drop
/// steps toward the slowest tier.
pub fn move_tier(tier: u32, accuracy: f64, prev_accuracy: f64, num_tiers: u32) -> u32 {
    debug_assert!(tier >= 1 && tier <= num_tiers);
    if accuracy >= prev_accuracy {
        tier.saturating_sub(1).max(1)
    } else {
        (tier + 1).min(num_tiers)
    }
}

/// Select participants from every tier up to the pointer.
///
/// Per tier, each member's weight is `ct / sum(ct)` (uniform when the
/// tier has no successful rounds yet) and the `tau` smallest weights are
/// taken, ties broken uniformly at random from `rng`. Tiers with fewer
/// than `tau` members contribute all of them; tiers past the end of the
/// table contribute nothing. Profiles are indexed by client id.
pub fn select_participants(
    table: &TierTable,
    tier_pointer: u32,
    profiles: &[ClientProfile],
    tau: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ClientId>, SelectionError> {
    let upto = (tier_pointer as usize).min(table.num_tiers());
    let mut picked: Vec<ClientId> = Vec::new();
    for tier in 0..upto {
        let members = table.tiers()[tier].as_slice();
        // ct orders members exactly as the probabilities do: the tier
        // total is a common positive denominator (uniform when zero).
        let mut ranked: Vec<(u64, u64, ClientId)> = members
            .iter()
            .map(|&c| (profiles[c.index()].successful_rounds, rng.gen::<u64>(), c))
            .collect();
        ranked.sort_unstable();
        picked.extend(ranked.iter().take(tau as usize).map(|&(_, _, c)| c));
    }
    if picked.is_empty() {
        return Err(SelectionError::EmptyRound(tier_pointer));
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Per-tier timeout thresholds for tiers 1 up to the pointer: the tier's
/// mean snapshot training time scaled by `beta`, capped at `omega`.
pub fn compute_thresholds(table: &TierTable, beta: f64, omega_s: f64, tier_pointer: u32) -> Vec<f64> {
    let upto = (tier_pointer as usize).min(table.num_tiers());
    (0..upto)
        .map(|tier| (table.tier_mean_time_s(tier) * beta).min(omega_s))
        .collect()
}
