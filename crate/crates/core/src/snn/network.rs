use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::layer;
use super::neuron::gate;
use super::{NetworkConfig, NetworkParams, SpikeMode};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probability floor applied before taking the log in [`loss`].
pub const LOSS_EPS: f64 = 1e-12;

/// Spike outputs of every layer over the simulation window.
///
/// Each entry is a `[timesteps, width]` tensor. Under [`SpikeMode::Hard`]
/// every value is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRecord {
    /// Per-layer spike trains.
    pub layers: Vec<Tensor>,
}

impl SpikeRecord {
    /// Total spikes emitted by each layer.
    pub fn layer_counts(&self) -> Vec<f64> {
        self.layers.iter().map(|t| t.values().iter().sum()).collect()
    }

    /// Mean over layers of `spikes / (T * width)`: the per-sample firing
    /// rate used for client credits. Always in `[0, 1]`.
    pub fn firing_rate(&self) -> f64 {
        let per_layer = self.layers.iter().map(|t| {
            let sum: f64 = t.values().iter().sum();
            sum / t.len() as f64
        });
        per_layer.sum::<f64>() / self.layers.len() as f64
    }
}

/// Result of presenting one sample to the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Softmax over the output layer's spike counts.
    pub class_probs: Tensor,
    /// Spike trains of every layer.
    pub spikes: SpikeRecord,
}

/// Full state of one simulated sample, kept for the backward pass.
pub(crate) struct Trace {
    /// Pre-reset potentials `v`, one `[T * width]` buffer per layer.
    pub potentials: Vec<Vec<f64>>,
    /// Layer outputs, `[T, width]` per layer.
    pub spikes: Vec<Tensor>,
    /// Softmax probabilities over output spike counts.
    pub probs: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Runs the unrolled network on one flattened sample.
///
/// The sample is injected unchanged as the first layer's input at every
/// timestep; since it is static, the first layer's current is computed
/// once.
pub(crate) fn simulate(
    params: &NetworkParams,
    sample: &[f64],
    config: &NetworkConfig,
    mode: SpikeMode,
) -> Result<Trace> {
    if sample.len() != config.input_len() {
        return Err(Error::ShapeMismatch {
            expected: format!("sample of length {}", config.input_len()),
            actual: format!("length {}", sample.len()),
        });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input sample"));
    }
    let steps = config.timesteps;
    let alpha = config.surrogate_alpha;
    let binary = mode == SpikeMode::Hard;
    let mut potentials = Vec::with_capacity(config.layers.len());
    let mut spikes: Vec<Tensor> = Vec::with_capacity(config.layers.len());

    for (l, (spec, w)) in config.layers.iter().zip(&params.weights).enumerate() {
        let width = spec.output_len();
        let mut v_all = vec![0.0; steps * width];
        let mut o_all = vec![0.0; steps * width];
        let mut membrane = vec![config.reset; width];
        let mut cur = vec![0.0; width];
        if l == 0 {
            layer::current(spec, w.values(), sample, &mut cur, false);
        }
        for t in 0..steps {
            if l > 0 {
                let prev = &spikes[l - 1].values()[t * spec.input_len()..(t + 1) * spec.input_len()];
                layer::current(spec, w.values(), prev, &mut cur, binary);
            }
            let v_t = &mut v_all[t * width..(t + 1) * width];
            let o_t = &mut o_all[t * width..(t + 1) * width];
            for n in 0..width {
                let v = membrane[n] + cur[n];
                let o = gate(mode, v - config.threshold, alpha);
                membrane[n] = v * (1.0 - o) + config.reset * o;
                v_t[n] = v;
                o_t[n] = o;
            }
        }
        if v_all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("membrane potential"));
        }
        potentials.push(v_all);
        spikes.push(Tensor::new(vec![steps, width], o_all).expect("trace shape"));
    }

    let last = spikes.last().expect("at least one layer");
    let classes = config.classes();
    let mut counts = vec![0.0; classes];
    for row in last.values().chunks_exact(classes) {
        for (c, o) in counts.iter_mut().zip(row) {
            *c += o;
        }
    }
    let probs = softmax(&counts);
    Ok(Trace { potentials, spikes, probs })
}

/// Presents `sample` for the configured window and returns class
/// probabilities (softmax of summed output spikes) with every layer's
/// spikes.
pub fn forward(params: &NetworkParams, sample: &Tensor, config: &NetworkConfig) -> Result<Forward> {
    forward_with(params, sample, config, SpikeMode::Hard)
}

/// [`forward`] with an explicit spike nonlinearity.
pub fn forward_with(
    params: &NetworkParams,
    sample: &Tensor,
    config: &NetworkConfig,
    mode: SpikeMode,
) -> Result<Forward> {
    params.check(config)?;
    let trace = simulate(params, sample.values(), config, mode)?;
    Ok(Forward {
        class_probs: Tensor::from_vec(trace.probs),
        spikes: SpikeRecord { layers: trace.spikes },
    })
}

/// Cross-entropy `-ln p[label]`, with `p` floored at [`LOSS_EPS`].
pub fn loss(class_probs: &Tensor, label: usize) -> Result<f64> {
    let p = class_probs.values().get(label).copied().ok_or_else(|| Error::ShapeMismatch {
        expected: format!("label < {}", class_probs.len()),
        actual: format!("label {label}"),
    })?;
    Ok(-libm::log(p.max(LOSS_EPS)))
}
