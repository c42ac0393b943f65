//! Simulation core for federated training of integrate-and-fire spiking
//! networks with firing-rate based client selection.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs plus an explicit seed; IO, file formats and
//! thread-pool execution live in the `sfedca-sim` companion crate.
//!
//! Module map:
//!
//! - [`snn`]: IF neurons, time-unrolled forward pass, BPTT with an arctan
//!   surrogate, SGD and local training.
//! - [`data`]: in-memory datasets, synthetic blobs, the four non-IID
//!   partitioners and test-time Gaussian noise.
//! - [`selection`]: per-category firing rates, credits and the client
//!   selection strategies.
//! - [`fed`]: aggregation and the round loop.
//! - [`metrics`]: accuracy, rounds-to-target, energy and selected-sample
//!   distribution tracking.
#![cfg_attr(not(test), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod data;
mod error;
pub mod fed;
pub mod metrics;
pub mod rng;
pub mod selection;
pub mod snn;
mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
