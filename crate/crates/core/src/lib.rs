//! Timeliness analysis of a two-user slotted random-access channel.
//!
//! User 1 queues bursty packets that expire after a fixed deadline; user 2
//! sends fresh status updates. Both share a Rayleigh-fading channel whose
//! receiver may decode simultaneous transmissions. The crate computes user
//! 1's drop rate, throughput and busy probability from a waiting-time Markov
//! chain, user 2's Age of Information from the resulting interference level,
//! and cross-checks everything against a seeded slot-level simulator.

pub mod aoi;
pub mod channel;
pub mod deadline_queue;
pub mod error;
pub mod exec;
pub mod markov;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod system;
pub mod validate;

pub use error::{Error, Result};
pub use exec::Execution;
pub use sim::{simulate, SimConfig, SimMode, SimulationReport};
pub use system::{analyze, AnalyticalReport, SweepAxis, SystemParams};
