use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// One weighted layer followed by a population of IF neurons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Fully connected `inputs -> outputs`.
    Dense {
        /// Input width.
        inputs: usize,
        /// Output width (neuron count).
        outputs: usize,
    },
    /// Valid (unpadded, stride 1) convolution, optionally followed by
    /// `pool x pool` average pooling of the synaptic currents.
    Conv {
        /// Input channels.
        in_channels: usize,
        /// Output channels.
        out_channels: usize,
        /// Square kernel side.
        kernel: usize,
        /// Input height.
        height: usize,
        /// Input width.
        width: usize,
        /// Pooling window side; 1 means no pooling.
        pool: usize,
    },
}

impl LayerSpec {
    /// Flattened input length.
    pub fn input_len(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv { in_channels, height, width, .. } => in_channels * height * width,
        }
    }

    /// Spatial size of the raw convolution output, `(h, w)`.
    pub(crate) fn conv_out(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Conv { kernel, height, width, .. } => {
                (height.saturating_sub(kernel) + 1, width.saturating_sub(kernel) + 1)
            }
            LayerSpec::Dense { .. } => (1, 1),
        }
    }

    /// Number of neurons in the layer.
    pub fn output_len(&self) -> usize {
        match *self {
            LayerSpec::Dense { outputs, .. } => outputs,
            LayerSpec::Conv { out_channels, pool, .. } => {
                let (oh, ow) = self.conv_out();
                out_channels * (oh / pool.max(1)) * (ow / pool.max(1))
            }
        }
    }

    /// Weight tensor shape: `[out, in]` or `[out_ch, in_ch, k, k]`.
    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => alloc::vec![outputs, inputs],
            LayerSpec::Conv { in_channels, out_channels, kernel, .. } => {
                alloc::vec![out_channels, in_channels, kernel, kernel]
            }
        }
    }

    /// `(fan_in, fan_out)` for initialisation.
    pub(crate) fn fans(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
            LayerSpec::Conv { in_channels, out_channels, kernel, .. } => {
                (in_channels * kernel * kernel, out_channels * kernel * kernel)
            }
        }
    }

    /// Multiply-accumulate count of one dense pass through the layer.
    /// Pooling adds are not counted.
    pub fn flops(&self) -> u64 {
        match *self {
            LayerSpec::Dense { inputs, outputs } => (inputs * outputs) as u64,
            LayerSpec::Conv { in_channels, out_channels, kernel, .. } => {
                let (oh, ow) = self.conv_out();
                (kernel * kernel * in_channels * oh * ow * out_channels) as u64
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return Err(invalid("dense layer widths must be positive"));
                }
            }
            LayerSpec::Conv { in_channels, out_channels, kernel, height, width, pool } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || pool == 0 {
                    return Err(invalid("conv layer sizes must be positive"));
                }
                if kernel > height || kernel > width {
                    return Err(invalid(format!(
                        "conv kernel {kernel} larger than input {height}x{width}"
                    )));
                }
                let (oh, ow) = self.conv_out();
                if oh < pool || ow < pool {
                    return Err(invalid(format!(
                        "pool {pool} larger than conv output {oh}x{ow}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Architecture and neuron constants of a spiking network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Weighted layers in order; each drives its own IF population.
    pub layers: Vec<LayerSpec>,
    /// Simulation window in timesteps.
    pub timesteps: usize,
    /// Firing threshold.
    pub threshold: f64,
    /// Potential a neuron is reset to after a spike.
    pub reset: f64,
    /// Sharpness of the arctan surrogate.
    pub surrogate_alpha: f64,
}

impl NetworkConfig {
    /// Default window.
    pub const DEFAULT_TIMESTEPS: usize = 12;
    /// Default firing threshold.
    pub const DEFAULT_THRESHOLD: f64 = 1.0;
    /// Default reset potential.
    pub const DEFAULT_RESET: f64 = 0.0;
    /// Default surrogate sharpness.
    pub const DEFAULT_ALPHA: f64 = 2.0;

    /// Validated config with the default neuron constants.
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let cfg = Self {
            layers,
            timesteps: Self::DEFAULT_TIMESTEPS,
            threshold: Self::DEFAULT_THRESHOLD,
            reset: Self::DEFAULT_RESET,
            surrogate_alpha: Self::DEFAULT_ALPHA,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully connected network with the given widths, e.g. `[784, 100, 10]`.
    pub fn mlp(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(invalid("an MLP needs at least an input and an output width"));
        }
        let layers = widths
            .windows(2)
            .map(|w| LayerSpec::Dense { inputs: w[0], outputs: w[1] })
            .collect();
        Self::new(layers)
    }

    /// Checks every structural and numeric constraint.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(invalid("network needs at least one layer"));
        }
        if self.timesteps == 0 {
            return Err(invalid("timesteps must be >= 1"));
        }
        if !(self.threshold.is_finite() && self.reset.is_finite()) {
            return Err(invalid("threshold and reset must be finite"));
        }
        if self.threshold <= self.reset {
            return Err(invalid("threshold must exceed the reset potential"));
        }
        if !(self.surrogate_alpha > 0.0 && self.surrogate_alpha.is_finite()) {
            return Err(invalid("surrogate alpha must be positive"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if i > 0 {
                let prev = self.layers[i - 1].output_len();
                if prev != layer.input_len() {
                    return Err(invalid(format!(
                        "layer {i} expects {} inputs but layer {} emits {prev}",
                        layer.input_len(),
                        i - 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Flattened sample length the first layer consumes.
    pub fn input_len(&self) -> usize {
        self.layers[0].input_len()
    }

    /// Number of output classes (width of the last layer).
    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].output_len()
    }

    /// Per-layer MAC counts of one dense forward pass.
    pub fn count_flops(&self) -> Vec<u64> {
        self.layers.iter().map(LayerSpec::flops).collect()
    }

    /// Neuron count per layer.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(LayerSpec::output_len).collect()
    }
}

/// Local optimisation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// SGD step size.
    pub learning_rate: f64,
    /// Passes over the local dataset.
    pub epochs: usize,
    /// Mini-batch size; the last batch of an epoch may be shorter.
    pub batch_size: usize,
    /// Shuffle seed.
    pub seed: u64,
}

impl TrainConfig {
    /// Rejects non-positive batch sizes and negative or non-finite rates.
    /// Zero epochs and a zero learning rate are accepted as no-ops.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be finite and non-negative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn flop_counts() {
        let cfg = NetworkConfig::mlp(&[784, 100, 10]).unwrap();
        assert_eq!(cfg.count_flops(), vec![78400, 1000]);

        let conv = LayerSpec::Conv {
            in_channels: 1,
            out_channels: 4,
            kernel: 3,
            height: 28,
            width: 28,
            pool: 1,
        };
        assert_eq!(conv.flops(), 9 * 676 * 4);
        assert_eq!(conv.flops(), 24336);
    }

    #[test]
    fn conv_pool_shapes() {
        let conv = LayerSpec::Conv {
            in_channels: 1,
            out_channels: 4,
            kernel: 3,
            height: 28,
            width: 28,
            pool: 2,
        };
        assert_eq!(conv.output_len(), 4 * 13 * 13);
        let cfg = NetworkConfig::new(vec![conv, LayerSpec::Dense { inputs: 676, outputs: 10 }]);
        assert!(cfg.is_ok());
        let bad = NetworkConfig::new(vec![conv, LayerSpec::Dense { inputs: 675, outputs: 10 }]);
        assert!(bad.is_err());
    }

    #[test]
    fn rejects_bad_neuron_constants() {
        let mut cfg = NetworkConfig::mlp(&[2, 2]).unwrap();
        cfg.timesteps = 0;
        assert!(cfg.validate().is_err());
        cfg.timesteps = 4;
        cfg.reset = 1.0;
        assert!(cfg.validate().is_err());
        cfg.reset = 0.0;
        cfg.surrogate_alpha = 0.0;
        assert!(cfg.validate().is_err());
    }
}
