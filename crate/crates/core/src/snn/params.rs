use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::NetworkConfig;
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Per-layer weight tensors of a spiking network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// One weight tensor per layer, shaped by [`super::LayerSpec::weight_shape`].
    pub weights: Vec<Tensor>,
}

impl NetworkParams {
    /// Uniform Glorot initialisation, `U(-b, b)` with
    /// `b = sqrt(6 / (fan_in + fan_out))` per layer.
    pub fn init(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> Self {
        let weights = config
            .layers
            .iter()
            .map(|layer| {
                let (fan_in, fan_out) = layer.fans();
                let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
                let shape = layer.weight_shape();
                let n = shape.iter().product();
                let values = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
                Tensor::new(shape, values).expect("shape from layer spec")
            })
            .collect();
        Self { weights }
    }

    /// All-zero weights for `config`.
    pub fn zeros(config: &NetworkConfig) -> Self {
        Self { weights: config.layers.iter().map(|l| Tensor::zeros(l.weight_shape())).collect() }
    }

    /// All-zero tensors shaped like `self`.
    pub fn zeros_like(&self) -> Self {
        Self { weights: self.weights.iter().map(|w| Tensor::zeros(w.shape().to_vec())).collect() }
    }

    /// Total scalar weight count.
    pub fn len(&self) -> usize {
        self.weights.iter().map(Tensor::len).sum()
    }

    /// True when there are no weights at all.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when every weight is finite.
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Tensor::is_finite)
    }

    /// Checks layer count and shapes against `config`.
    pub fn check(&self, config: &NetworkConfig) -> Result<()> {
        if self.weights.len() != config.layers.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} layers", config.layers.len()),
                actual: format!("{} layers", self.weights.len()),
            });
        }
        for (w, layer) in self.weights.iter().zip(&config.layers) {
            if w.shape() != layer.weight_shape().as_slice() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?}", layer.weight_shape()),
                    actual: format!("{:?}", w.shape()),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn check_like(&self, other: &NetworkParams) -> Result<()> {
        if self.weights.len() != other.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} layers", self.weights.len()),
                actual: format!("{} layers", other.weights.len()),
            });
        }
        self.weights.iter().zip(&other.weights).try_for_each(|(a, b)| a.check_same_shape(b))
    }

    /// Iterates every weight, layer by layer.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flat_map(|w| w.values().iter())
    }

    /// Mutable iteration over every weight, layer by layer.
    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().flat_map(|w| w.values_mut().iter_mut())
    }
}

/// Plain gradient step `w - lr * g`.
pub fn sgd_step(params: &NetworkParams, grads: &NetworkParams, lr: f64) -> Result<NetworkParams> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(invalid("learning rate must be positive"));
    }
    params.check_like(grads)?;
    let mut next = params.clone();
    for (w, g) in next.iter_mut().zip(grads.iter()) {
        *w -= lr * g;
    }
    if !next.is_finite() {
        return Err(Error::NonFinite("weights after SGD step"));
    }
    Ok(next)
}
