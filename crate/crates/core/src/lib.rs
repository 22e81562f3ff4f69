//! Baseband building blocks for sending analog encoder features over OFDM.
//!
//! The crate covers the physical layer between a feature encoder and its
//! decoder: latency-driven channel scheduling, the feature-to-symbol
//! mapping, cross-subcarrier precoding, OFDM modulation and equalization,
//! a multipath channel simulator, quality metrics and a discrete-event
//! model of the two-worker streaming pipeline.
//!
//! It is `no_std` and only needs `alloc`. File IO, the wall-clock
//! streaming harness and the experiment CLI live in `jscc-sim`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod error;
pub mod feature;
pub mod link;
pub mod mapper;
pub mod metrics;
pub mod modem;
pub mod precoder;
pub mod rng;
pub mod scheduler;
pub mod signal;
pub mod stream;

pub use error::{Error, Result};
pub use signal::{OfdmConfig, C64};
