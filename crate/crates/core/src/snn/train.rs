use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backward::backward_counting;
use super::{sgd_step, NetworkConfig, NetworkParams, SpikeMode, TrainConfig};
use crate::data::DataView;
use crate::error::{Error, Result};

/// Sample presentations and emitted spikes, for energy accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkStats {
    /// Sample presentations (forward + backward) performed.
    pub samples: u64,
    /// Spikes emitted by each layer over all presentations.
    pub layer_spikes: Vec<u64>,
}

/// Mini-batch SGD for `train.epochs` passes over a seeded shuffle of
/// `data`. The input parameters are left untouched.
pub fn train_local(
    params: &NetworkParams,
    data: &DataView<'_>,
    train: &TrainConfig,
    config: &NetworkConfig,
) -> Result<NetworkParams> {
    train_local_with_stats(params, data, train, config).map(|(p, _)| p)
}

/// [`train_local`] that also reports the work done, for energy accounting.
pub fn train_local_with_stats(
    params: &NetworkParams,
    data: &DataView<'_>,
    train: &TrainConfig,
    config: &NetworkConfig,
) -> Result<(NetworkParams, WorkStats)> {
    train.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("local dataset"));
    }
    params.check(config)?;
    let mut stats = WorkStats { samples: 0, layer_spikes: alloc::vec![0; config.layers.len()] };
    let mut current = params.clone();
    if train.epochs == 0 || train.learning_rate == 0.0 {
        return Ok((current, stats));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..train.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(train.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| data.get(i)).collect();
            let g = backward_counting(
                &current,
                &batch,
                config,
                SpikeMode::Hard,
                Some(&mut stats.layer_spikes),
            )?;
            current = sgd_step(&current, &g.grads, train.learning_rate)?;
            stats.samples += chunk.len() as u64;
        }
    }
    Ok((current, stats))
}
