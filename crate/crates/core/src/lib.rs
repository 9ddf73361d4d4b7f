//! Deterministic simulator for cloud-rendered XR streaming.
//!
//! The crate is layered bottom-up:
//!
//! - [`media_calc`]: bandwidth and latency arithmetic for XR displays.
//! - [`traffic`]: downlink frame bursts, sync packets and uplink pose packets.
//! - [`netsim`]: discrete-event bottleneck network with frame-aware AQM,
//!   decoder dependency evaluation and vantage-point measurement.
//! - [`qoe`]: KPI to MQI/IQI/PQI factor tree, scalar QoE and step reward.
//! - [`rl`]: multi-agent actor-critic bitrate controller.
//! - [`session`]: interval-by-interval streaming sessions and controllers.

pub mod error;
pub mod media_calc;
pub mod netsim;
pub mod qoe;
pub mod rl;
pub mod session;
pub mod time;
pub mod traffic;

pub use error::{Error, Result};
pub use time::SimTime;
