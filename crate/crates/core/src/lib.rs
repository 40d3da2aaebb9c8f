//! Deterministic virtual-time simulator of federated learning over
//! unreliable, heterogeneous wireless clients.
//!
//! The crate models a central aggregation server coordinating a pool of
//! clients whose per-round training times are heterogeneous (per-group
//! Gaussian delays) and unreliable (randomly injected multi-second
//! failures). Four orchestration strategies run behind a common
//! [`engine::Strategy`] trait and are selected by name at runtime:
//!
//! * `feddct` — dynamic tiering with cross-tier client selection and
//!   per-tier timeout thresholds,
//! * `fedavg` — synchronous uniform selection with an unbounded barrier,
//! * `tifl` — static tiering with adaptive tier selection and permanent
//!   dropout of over-threshold clients,
//! * `fedasync` — staleness-weighted asynchronous merging.
//!
//! All randomness comes from named substreams of a single run seed
//! ([`rng::RngStreams`]), so a config replays to byte-identical traces and
//! paired runs of different strategies see identical data and latency
//! draws.

pub mod client;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod latency;
pub mod model;
pub mod rng;
pub mod selection;
pub mod tiering;

pub use client::{ClientId, ClientProfile, ClientState};
pub use config::{ConfigError, MasterFraction, SimConfig, StrategyKind};
pub use engine::{RoundReport, RunOptions, RunOutput};
