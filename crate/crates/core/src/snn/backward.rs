use alloc::vec;
use alloc::vec::Vec;

use super::layer;
use super::network::{simulate, Trace, LOSS_EPS};
use super::neuron::surrogate_grad;
use super::{NetworkConfig, NetworkParams, SpikeMode};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Batch-mean gradient and loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `dL/dW`, shaped like the parameters.
    pub grads: NetworkParams,
    /// Mean cross-entropy over the batch.
    pub mean_loss: f64,
}

/// Backpropagation through time over a batch of `(sample, label)` pairs,
/// using binary spikes forward and the arctan surrogate backward.
pub fn backward(
    params: &NetworkParams,
    batch: &[(&Tensor, usize)],
    config: &NetworkConfig,
) -> Result<Gradients> {
    backward_with(params, batch, config, SpikeMode::Hard)
}

/// [`backward`] with an explicit spike nonlinearity.
///
/// Under [`SpikeMode::Hard`] the reset gate is treated as a constant.
/// Under [`SpikeMode::Smooth`] the gradient also flows through the reset
/// gate, so the result is the exact gradient of the smoothed network.
pub fn backward_with(
    params: &NetworkParams,
    batch: &[(&Tensor, usize)],
    config: &NetworkConfig,
    mode: SpikeMode,
) -> Result<Gradients> {
    backward_counting(params, batch, config, mode, None)
}

/// Backward pass that also adds every layer's emitted spike count into
/// `layer_spikes` (hard mode only).
pub(crate) fn backward_counting(
    params: &NetworkParams,
    batch: &[(&Tensor, usize)],
    config: &NetworkConfig,
    mode: SpikeMode,
    mut layer_spikes: Option<&mut [u64]>,
) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    params.check(config)?;
    let classes = config.classes();
    let mut acc: Vec<Vec<f64>> = params.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut total_loss = 0.0;
    for (sample, label) in batch {
        if *label >= classes {
            return Err(Error::InvalidConfig(alloc::format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let trace = simulate(params, sample.values(), config, mode)?;
        if let Some(counts) = layer_spikes.as_deref_mut() {
            for (c, layer) in counts.iter_mut().zip(&trace.spikes) {
                *c += layer.values().iter().filter(|&&o| o != 0.0).count() as u64;
            }
        }
        total_loss += -libm::log(trace.probs[*label].max(LOSS_EPS));
        accumulate(params, sample.values(), &trace, *label, config, mode, &mut acc);
    }
    let scale = 1.0 / batch.len() as f64;
    let weights = params
        .weights
        .iter()
        .zip(acc)
        .map(|(w, mut g)| {
            g.iter_mut().for_each(|v| *v *= scale);
            Tensor::new(w.shape().to_vec(), g).expect("gradient shape")
        })
        .collect();
    let grads = NetworkParams { weights };
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(Gradients { grads, mean_loss: total_loss * scale })
}

/// Adds one sample's gradient into `acc`.
fn accumulate(
    params: &NetworkParams,
    sample: &[f64],
    trace: &Trace,
    label: usize,
    config: &NetworkConfig,
    mode: SpikeMode,
    acc: &mut [Vec<f64>],
) {
    let steps = config.timesteps;
    let alpha = config.surrogate_alpha;
    let depth = config.layers.len();

    // dL/d(count_c) = p_c - y_c, and every timestep's output spike feeds
    // the count with weight one.
    let mut d_count = trace.probs.clone();
    d_count[label] -= 1.0;
    let mut d_out: Vec<f64> = Vec::with_capacity(steps * d_count.len());
    for _ in 0..steps {
        d_out.extend_from_slice(&d_count);
    }

    for l in (0..depth).rev() {
        let spec = &config.layers[l];
        let width = spec.output_len();
        let v_all = &trace.potentials[l];
        let o_all = trace.spikes[l].values();
        let mut d_cur = vec![0.0; steps * width];
        // dL/du^{t}, carried backwards through the charge equation.
        let mut d_mem = vec![0.0; width];
        for t in (0..steps).rev() {
            let base = t * width;
            for n in 0..width {
                let v = v_all[base + n];
                let o = o_all[base + n];
                let sg = surrogate_grad(v - config.threshold, alpha);
                let mut dv = d_out[base + n] * sg + d_mem[n] * (1.0 - o);
                if mode == SpikeMode::Smooth {
                    dv += d_mem[n] * (config.reset - v) * sg;
                }
                d_cur[base + n] = dv;
                d_mem[n] = dv;
            }
        }

        let w = params.weights[l].values();
        if l == 0 {
            // static input: sum the current gradient over time first
            let mut summed = vec![0.0; width];
            for row in d_cur.chunks_exact(width) {
                for (s, g) in summed.iter_mut().zip(row) {
                    *s += g;
                }
            }
            layer::backprop(spec, w, sample, &summed, &mut acc[0], None);
        } else {
            let in_len = spec.input_len();
            let prev = trace.spikes[l - 1].values();
            let mut d_prev = vec![0.0; steps * in_len];
            for t in 0..steps {
                layer::backprop(
                    spec,
                    w,
                    &prev[t * in_len..(t + 1) * in_len],
                    &d_cur[t * width..(t + 1) * width],
                    &mut acc[l],
                    Some(&mut d_prev[t * in_len..(t + 1) * in_len]),
                );
            }
            d_out = d_prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{forward_with, loss, LayerSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn smooth_loss(
        params: &NetworkParams,
        batch: &[(&Tensor, usize)],
        cfg: &NetworkConfig,
    ) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|(x, y)| {
                let out = forward_with(params, x, cfg, SpikeMode::Smooth).unwrap();
                loss(&out.class_probs, *y).unwrap()
            })
            .sum();
        total / batch.len() as f64
    }

    fn fd_check(cfg: &NetworkConfig, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = NetworkParams::init(cfg, &mut rng);
        params.iter_mut().for_each(|w| *w *= scale);
        let xs: Vec<Tensor> = (0..3)
            .map(|i| {
                Tensor::from_vec(
                    (0..cfg.input_len()).map(|j| ((i * 5 + j * 3) % 7) as f64 / 3.0 - 0.5).collect(),
                )
            })
            .collect();
        let batch: Vec<(&Tensor, usize)> =
            xs.iter().enumerate().map(|(i, x)| (x, i % cfg.classes())).collect();
        let g = backward_with(&params, &batch, cfg, SpikeMode::Smooth).unwrap();
        assert!((g.mean_loss - smooth_loss(&params, &batch, cfg)).abs() < 1e-12);
        let h = 1e-5;
        let analytic: Vec<f64> = g.grads.iter().copied().collect();
        let n = params.len();
        for i in 0..n {
            let mut plus = params.clone();
            let mut minus = params.clone();
            *plus.iter_mut().nth(i).unwrap() += h;
            *minus.iter_mut().nth(i).unwrap() -= h;
            let fd = (smooth_loss(&plus, &batch, cfg) - smooth_loss(&minus, &batch, cfg)) / (2.0 * h);
            let denom = fd.abs().max(analytic[i].abs()).max(1e-8);
            assert!(
                (fd - analytic[i]).abs() / denom < 1e-4 || (fd - analytic[i]).abs() < 1e-9,
                "weight {i}: fd {fd} vs bptt {}",
                analytic[i]
            );
        }
    }

    #[test]
    fn smooth_dense_matches_finite_differences() {
        let mut cfg = NetworkConfig::mlp(&[4, 5, 3]).unwrap();
        cfg.timesteps = 4;
        fd_check(&cfg, 1, 3.0);
    }

    #[test]
    fn smooth_conv_matches_finite_differences() {
        let mut cfg = NetworkConfig::new(vec![
            LayerSpec::Conv { in_channels: 1, out_channels: 2, kernel: 2, height: 5, width: 5, pool: 2 },
            LayerSpec::Dense { inputs: 8, outputs: 2 },
        ])
        .unwrap();
        cfg.timesteps = 3;
        fd_check(&cfg, 2, 3.0);
    }

    #[test]
    fn hard_gradient_is_finite_and_shaped() {
        let cfg = NetworkConfig::mlp(&[3, 4, 2]).unwrap();
        let p = NetworkParams::zeros(&cfg);
        let x = Tensor::from_vec(vec![1.0, 0.5, -0.2]);
        let g = backward(&p, &[(&x, 1)], &cfg).unwrap();
        assert!(g.grads.check(&cfg).is_ok());
        assert!(g.grads.is_finite());
        assert!((g.mean_loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let cfg = NetworkConfig::mlp(&[3, 2]).unwrap();
        let p = NetworkParams::zeros(&cfg);
        assert_eq!(backward(&p, &[], &cfg), Err(Error::Empty("batch")));
    }
}
