//! Profiling, the static tiering function, running-average profile
//! updates, and the straggler re-evaluation lifecycle.

use crate::client::{ClientId, ClientProfile, ClientState};

/// The assignment of active clients to ordered tiers (tier 1 fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct TierTable {
    tiers: Vec<Vec<ClientId>>,
    /// Snapshot of the (client, avg time) pairs used to build the table,
    /// ascending.
    built_from: Vec<(ClientId, f64)>,
}

impl TierTable {
    pub fn tiers(&self) -> &[Vec<ClientId>] {
        &self.tiers
    }

    pub fn num_tiers(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    /// Zero-based tier index of a client, if tiered.
    pub fn tier_of(&self, client: ClientId) -> Option<usize> {
        self.tiers
            .iter()
            .position(|tier| tier.contains(&client))
    }

    /// The avg-time snapshot the table was built from.
    pub fn built_from(&self) -> &[(ClientId, f64)] {
        &self.built_from
    }

    /// Mean snapshot training time of one tier.
    pub fn tier_mean_time_s(&self, tier: usize) -> f64 {
        let members = &self.tiers[tier];
        let sum: f64 = members
            .iter()
            .map(|c| {
                self.built_from
                    .iter()
                    .find(|(id, _)| id == c)
                    .expect("tier member in snapshot")
                    .1
            })
            .sum();
        sum / members.len() as f64
    }
}

/// Profile every client with `kappa` timing waves.
///
/// Returns the profiles (average time over the waves, zero successful
/// rounds, clients at or above `omega_s` dropped as Excluded) together
/// with the per-wave maximum times, which is what the waves cost on the
/// virtual clock since clients profile in parallel.
pub fn profile_clients(
    latency_groups: &[usize],
    kappa: u32,
    omega_s: f64,
    mut sampler: impl FnMut(ClientId, u32) -> f64,
) -> (Vec<ClientProfile>, Vec<f64>) {
    assert!(kappa >= 1);
    let n = latency_groups.len();
    let mut sums = vec![0.0f64; n];
    let mut wave_max = Vec::with_capacity(kappa as usize);
    for wave in 0..kappa {
        let mut max = 0.0f64;
        for (client, sum) in sums.iter_mut().enumerate() {
            let draw = sampler(ClientId(client as u32), wave);
            *sum += draw;
            max = max.max(draw);
        }
        wave_max.push(max);
    }
    let profiles = sums
        .into_iter()
        .enumerate()
        .map(|(client, sum)| {
            let avg = sum / kappa as f64;
            ClientProfile {
                id: ClientId(client as u32),
                avg_time_s: avg,
                successful_rounds: 0,
                state: if avg >= omega_s {
                    ClientState::Excluded
                } else {
                    ClientState::Active
                },
                latency_group: latency_groups[client],
            }
        })
        .collect();
    (profiles, wave_max)
}

/// Sort clients ascending by average training time (stable tie-break by
/// client id) and fill tiers in chunks of `clients_per_tier`. The last
/// tier may be short when the active count is not divisible.
pub fn tier(active: &[(ClientId, f64)], clients_per_tier: usize) -> TierTable {
    assert!(clients_per_tier >= 1);
    let mut sorted = active.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let tiers = sorted
        .chunks(clients_per_tier)
        .map(|chunk| chunk.iter().map(|(id, _)| *id).collect())
        .collect();
    TierTable {
        tiers,
        built_from: sorted,
    }
}

/// Convenience: tier the Active subset of a profile list.
pub fn tier_active(profiles: &[ClientProfile], clients_per_tier: usize) -> TierTable {
    let active: Vec<(ClientId, f64)> = profiles
        .iter()
        .filter(|p| p.is_active())
        .map(|p| (p.id, p.avg_time_s))
        .collect();
    tier(&active, clients_per_tier)
}

/// Fold an observed in-threshold training time into the running average
/// and count the successful round.
pub fn update_profile(profile: &mut ClientProfile, observed_s: f64) {
    let ct = profile.successful_rounds as f64;
    profile.avg_time_s = (profile.avg_time_s * ct + observed_s) / (ct + 1.0);
    profile.successful_rounds += 1;
}

/// Move a timed-out client into the parallel evaluation program. Until
/// the evaluation completes the client is ineligible for selection and
/// its training results are not aggregated.
pub fn begin_reevaluation(profile: &mut ClientProfile, kappa: u32) {
    assert!(kappa >= 1);
    profile.state = ClientState::UnderEvaluation {
        rounds_remaining: kappa,
        accumulated_s: 0.0,
    };
}

/// What an evaluation step concluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalOutcome {
    /// More evaluation trainings outstanding.
    Pending,
    /// Evaluation finished below the timeout: the client re-participates.
    Reinstated { avg_s: f64 },
    /// Evaluation finished at/above the timeout: permanent dropout.
    Excluded { avg_s: f64 },
}

/// Account one completed evaluation training. On the final step the
/// client's average time is replaced by the evaluation mean and the
/// dropout rule decides between reinstatement and exclusion.
pub fn apply_evaluation_step(
    profile: &mut ClientProfile,
    draw_s: f64,
    kappa: u32,
    omega_s: f64,
) -> EvalOutcome {
    match &mut profile.state {
        ClientState::UnderEvaluation {
            rounds_remaining,
            accumulated_s,
        } => {
            *accumulated_s += draw_s;
            *rounds_remaining -= 1;
            if *rounds_remaining > 0 {
                return EvalOutcome::Pending;
            }
            let avg = *accumulated_s / kappa as f64;
            profile.avg_time_s = avg;
            if avg >= omega_s {
                profile.state = ClientState::Excluded;
                EvalOutcome::Excluded { avg_s: avg }
            } else {
                profile.state = ClientState::Active;
                EvalOutcome::Reinstated { avg_s: avg }
            }
        }
        _ => {
            debug_assert!(false, "evaluation step on a client not under evaluation");
            EvalOutcome::Pending
        }
    }
}
