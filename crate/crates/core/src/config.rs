//! Experiment configuration: one JSON document describes a full run.
//!
//! Unknown keys are a hard error; omitted keys take the defaults below.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::NUM_CLASSES;

/// Orchestration strategy to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    FedDct,
    FedAvg,
    Tifl,
    FedAsync,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::FedDct,
        StrategyKind::FedAvg,
        StrategyKind::Tifl,
        StrategyKind::FedAsync,
    ];

    /// Stable lowercase token used in config files and CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::FedDct => "feddct",
            StrategyKind::FedAvg => "fedavg",
            StrategyKind::Tifl => "tifl",
            StrategyKind::FedAsync => "fedasync",
        }
    }

    pub fn parse(token: &str) -> Option<StrategyKind> {
        Self::ALL.iter().copied().find(|s| s.as_str() == token)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Severity of label skew: either `iid` or the fraction of each client's
/// samples that belong to its single master class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MasterFraction {
    Iid,
    Fraction(f64),
}

impl MasterFraction {
    pub fn is_iid(self) -> bool {
        matches!(self, MasterFraction::Iid)
    }
}

impl fmt::Display for MasterFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MasterFraction::Iid => f.write_str("iid"),
            MasterFraction::Fraction(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for MasterFraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            MasterFraction::Iid => serializer.serialize_str("iid"),
            MasterFraction::Fraction(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for MasterFraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FractionVisitor;

        impl<'de> Visitor<'de> for FractionVisitor {
            type Value = MasterFraction;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or the string \"iid\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "iid" {
                    Ok(MasterFraction::Iid)
                } else {
                    Err(E::custom(format!("expected \"iid\" or a number, got {v:?}")))
                }
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(MasterFraction::Fraction(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(MasterFraction::Fraction(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(MasterFraction::Fraction(v as f64))
            }
        }

        deserializer.deserialize_any(FractionVisitor)
    }
}

/// Full experiment description.
///
/// Field names are exactly the JSON keys of the config schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub strategy: StrategyKind,
    pub num_clients: u32,
    /// M: number of tiers.
    pub num_tiers: u32,
    /// τ: clients selected per tier per round.
    pub tau: u32,
    /// β: timeout tolerance multiplier on a tier's mean training time.
    pub beta: f64,
    /// κ: profiling / re-evaluation rounds.
    pub kappa: u32,
    /// Ω: maximum timeout, seconds.
    pub omega_s: f64,
    /// μ: per-(client, round) probability of an injected failure delay.
    pub mu: f64,
    pub noniid_fraction: MasterFraction,
    pub base_delay_means_s: Vec<f64>,
    pub base_delay_stddev_s: f64,
    pub straggler_delay_range_s: [f64; 2],
    pub rounds: u32,
    pub target_accuracy: f64,
    pub learning_rate: f64,
    pub batch_size: u32,
    pub local_epochs: u32,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::FedDct,
            num_clients: 50,
            num_tiers: 5,
            tau: 5,
            beta: 1.2,
            kappa: 1,
            omega_s: 30.0,
            mu: 0.1,
            noniid_fraction: MasterFraction::Fraction(0.7),
            base_delay_means_s: vec![5.0, 10.0, 15.0, 20.0, 25.0],
            base_delay_stddev_s: std::f64::consts::SQRT_2,
            straggler_delay_range_s: [30.0, 60.0],
            rounds: 200,
            target_accuracy: 0.8,
            learning_rate: 0.2,
            batch_size: 10,
            local_epochs: 1,
            seed: 42,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
}

impl ConfigError {
    fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

impl SimConfig {
    /// m = num_clients / num_tiers, the tier capacity from the initial pool.
    pub fn clients_per_tier(&self) -> u32 {
        self.num_clients / self.num_tiers
    }

    pub fn from_json_str(s: &str) -> Result<SimConfig, ConfigError> {
        serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the resolved config document.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let bytes = hasher.finalize();
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Check every config invariant, reporting the first violation.
    pub fn validate(self) -> Result<SimConfig, ConfigError> {
        if self.num_clients == 0 {
            return Err(ConfigError::invalid("num_clients", "must be positive"));
        }
        if self.num_tiers == 0 {
            return Err(ConfigError::invalid("num_tiers", "must be positive"));
        }
        if self.tau == 0 {
            return Err(ConfigError::invalid("tau", "must be positive"));
        }
        if !self.beta.is_finite() || self.beta <= 1.0 {
            return Err(ConfigError::invalid("beta", "must be a finite real > 1"));
        }
        if self.kappa == 0 {
            return Err(ConfigError::invalid("kappa", "must be positive"));
        }
        if !self.omega_s.is_finite() || self.omega_s <= 0.0 {
            return Err(ConfigError::invalid("omega_s", "must be a finite real > 0"));
        }
        if !self.mu.is_finite() || !(0.0..=1.0).contains(&self.mu) {
            return Err(ConfigError::invalid("mu", "must lie in [0, 1]"));
        }
        if let MasterFraction::Fraction(f) = self.noniid_fraction {
            let lo = 1.0 / NUM_CLASSES as f64;
            if !f.is_finite() || f < lo || f > 1.0 {
                return Err(ConfigError::invalid(
                    "noniid_fraction",
                    format!("must be \"iid\" or a fraction in [{lo}, 1]"),
                ));
            }
        }
        if self.base_delay_means_s.is_empty() {
            return Err(ConfigError::invalid("base_delay_means_s", "must be non-empty"));
        }
        if self.base_delay_means_s.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(ConfigError::invalid(
                "base_delay_means_s",
                "every group mean must be a finite real > 0",
            ));
        }
        if !self.base_delay_stddev_s.is_finite() || self.base_delay_stddev_s < 0.0 {
            return Err(ConfigError::invalid(
                "base_delay_stddev_s",
                "must be a finite real >= 0",
            ));
        }
        let [lo, hi] = self.straggler_delay_range_s;
        if !lo.is_finite() || !hi.is_finite() || lo < 0.0 {
            return Err(ConfigError::invalid(
                "straggler_delay_range_s",
                "bounds must be finite reals >= 0",
            ));
        }
        if lo > hi {
            return Err(ConfigError::invalid(
                "straggler_delay_range_s",
                "lower bound exceeds upper bound",
            ));
        }
        if self.rounds == 0 {
            return Err(ConfigError::invalid("rounds", "must be positive"));
        }
        if !self.target_accuracy.is_finite()
            || self.target_accuracy <= 0.0
            || self.target_accuracy > 1.0
        {
            return Err(ConfigError::invalid("target_accuracy", "must lie in (0, 1]"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(ConfigError::invalid(
                "learning_rate",
                "must be a finite real >= 0",
            ));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::invalid("batch_size", "must be positive"));
        }
        if self.local_epochs == 0 {
            return Err(ConfigError::invalid("local_epochs", "must be positive"));
        }
        if !self.num_clients.is_multiple_of(self.num_tiers) {
            return Err(ConfigError::invalid(
                "num_clients",
                format!("not divisible by num_tiers ({})", self.num_tiers),
            ));
        }
        if self.tau > self.clients_per_tier() {
            return Err(ConfigError::invalid(
                "tau",
                format!("exceeds tier size ({})", self.clients_per_tier()),
            ));
        }
        if !(self.num_clients as usize).is_multiple_of(self.base_delay_means_s.len()) {
            return Err(ConfigError::invalid(
                "base_delay_means_s",
                format!(
                    "num_clients ({}) not divisible into {} latency groups",
                    self.num_clients,
                    self.base_delay_means_s.len()
                ),
            ));
        }
        Ok(self)
    }
}
