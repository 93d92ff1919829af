//! # beaconsim
//!
//! A deterministic discrete-event simulator of periodic safety-beacon
//! broadcasting in a vehicular ad hoc network. Three transmit-power
//! strategies run over the same CSMA/Nakagami channel model:
//!
//! - `pbpc`: each vehicle analyzes its received-beacon window and picks the
//!   next power with a single-particle PSO step,
//! - `dfpav`: a fair synchronized water-filling ramp bounded by a maximum
//!   beaconing load,
//! - `none`: a fixed-power baseline.
//!
//! The crate exposes the protocol arithmetic, the channel model, and the
//! engine as a library; the `beaconsim` binary wraps it in a CLI that emits
//! per-second metrics CSVs.

pub mod channel_analysis;
pub mod config;
pub mod core_model;
pub mod dfpav_baseline;
pub mod engine;
pub mod error;
pub mod mac_broadcast;
pub mod metrics;
pub mod mobility;
pub mod phy_channel;
pub mod pso_power;

pub use config::{Protocol, SimConfig};
pub use engine::run;
pub use error::{Error, Result};
pub use metrics::{compare_runs, write_metrics_csv, MetricsRow};
