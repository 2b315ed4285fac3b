//! Uplink-downlink duality for cloud radio access networks whose relays forward
//! compressed signals over capacity-limited fronthaul links.
//!
//! The uplink (multiple-access relay channel) is solved globally by fixed-point power control
//! with MMSE receivers. The downlink (broadcast relay channel) is solved at fixed transmit
//! beamformers, by a square linear system under independent compression and by a log-barrier
//! method under multivariate compression. [`verify`] compares the two and checks the dual
//! variables of the downlink against the uplink powers and quantization noise levels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod channel;
pub mod downlink;
pub mod error;
pub mod experiment;
pub mod hermitian;
pub mod parallel;
pub mod rates;
pub mod rng;
pub mod uplink;
pub mod verify;

pub use channel::{generate_rayleigh, Case, NetworkInstance, Order, RateTargets, StrategyConfig};
pub use error::{Error, Result};
pub use parallel::Execution;
