//! Integrate-and-fire spiking network: dynamics, forward pass, BPTT and
//! local SGD training.

mod backward;
mod config;
mod layer;
mod network;
mod neuron;
mod params;
mod train;

pub use backward::{backward, backward_with, Gradients};
pub use config::{LayerSpec, NetworkConfig, TrainConfig};
pub use network::{forward, forward_with, loss, Forward, SpikeRecord, LOSS_EPS};
pub use neuron::{heaviside, if_step, smooth_spike, surrogate_grad, SpikeMode};
pub use params::{sgd_step, NetworkParams};
pub use train::{train_local, train_local_with_stats, WorkStats};

pub(crate) use network::simulate;
