use alloc::vec::Vec;
use core::f64::consts::PI;

use super::NetworkConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Spike nonlinearity used by the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeMode {
    /// Binary Heaviside spikes; the backward pass substitutes the arctan
    /// surrogate for the step derivative and treats the reset gate as a
    /// constant.
    #[default]
    Hard,
    /// Smoothed twin: the gate is the arctan sigmoid itself, so the whole
    /// unrolled network is differentiable. The backward pass then also
    /// differentiates through the reset gate, which makes its gradient
    /// exact and checkable against finite differences.
    Smooth,
}

/// Step function: 1 for `x >= 0`, else 0.
#[inline]
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Arctan surrogate for the step derivative,
/// `alpha / (2 (1 + (pi/2 * alpha * x)^2))`.
#[inline]
pub fn surrogate_grad(x: f64, alpha: f64) -> f64 {
    let s = PI / 2.0 * alpha * x;
    alpha / (2.0 * (1.0 + s * s))
}

/// Arctan sigmoid `atan(pi/2 * alpha * x) / pi + 1/2`, whose exact
/// derivative is [`surrogate_grad`].
#[inline]
pub fn smooth_spike(x: f64, alpha: f64) -> f64 {
    libm::atan(PI / 2.0 * alpha * x) / PI + 0.5
}

#[inline]
pub(crate) fn gate(mode: SpikeMode, x: f64, alpha: f64) -> f64 {
    match mode {
        SpikeMode::Hard => heaviside(x),
        SpikeMode::Smooth => smooth_spike(x, alpha),
    }
}

/// One integrate-and-fire update for a population of neurons.
///
/// Charges `v = membrane + current`, fires `o = H(v - threshold)` and
/// hard-resets `u = v (1 - o) + reset * o`. Returns the spikes and the
/// post-step membrane.
pub fn if_step(
    membrane: &Tensor,
    current: &Tensor,
    config: &NetworkConfig,
) -> Result<(Vec<u8>, Tensor)> {
    membrane.check_same_shape(current)?;
    let mut next = membrane.clone();
    let mut spikes = Vec::with_capacity(membrane.len());
    for (u, &i) in next.values_mut().iter_mut().zip(current.values()) {
        let v = *u + i;
        let o = heaviside(v - config.threshold);
        *u = v * (1.0 - o) + config.reset * o;
        spikes.push(o as u8);
    }
    if !next.is_finite() {
        return Err(Error::NonFinite("membrane potential"));
    }
    Ok((spikes, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg() -> NetworkConfig {
        NetworkConfig::mlp(&[1, 1]).unwrap()
    }

    fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(vec![v])
    }

    #[test]
    fn heaviside_examples() {
        assert_eq!(heaviside(-0.5), 0.0);
        assert_eq!(heaviside(0.0), 1.0);
        assert_eq!(heaviside(3.2), 1.0);
    }

    #[test]
    fn if_step_examples() {
        let c = cfg();
        let (s, m) = if_step(&scalar(0.4), &scalar(0.3), &c).unwrap();
        assert_eq!(s, vec![0]);
        assert!((m.values()[0] - 0.7).abs() < 1e-15);

        let (s, m) = if_step(&scalar(0.8), &scalar(0.3), &c).unwrap();
        assert_eq!(s, vec![1]);
        assert_eq!(m.values()[0], 0.0);

        let (s, m) = if_step(&scalar(0.0), &scalar(0.0), &c).unwrap();
        assert_eq!(s, vec![0]);
        assert_eq!(m.values()[0], 0.0);
    }

    #[test]
    fn if_step_shape_mismatch() {
        let c = cfg();
        let r = if_step(&Tensor::from_vec(vec![0.0, 0.0]), &scalar(1.0), &c);
        assert!(matches!(r, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn reset_goes_to_configured_potential() {
        let mut c = cfg();
        c.reset = -0.25;
        let (s, m) = if_step(&scalar(0.9), &scalar(0.5), &c).unwrap();
        assert_eq!(s, vec![1]);
        assert_eq!(m.values()[0], -0.25);
    }

    #[test]
    fn surrogate_values() {
        assert_eq!(surrogate_grad(0.0, 2.0), 1.0);
        let expected = 2.0 / (2.0 * (1.0 + PI * PI));
        assert!((surrogate_grad(-1.0, 2.0) - expected).abs() < 1e-15);
        assert!((surrogate_grad(-1.0, 2.0) - 0.0920).abs() < 5e-5);
        assert_eq!(smooth_spike(0.0, 2.0), 0.5);
    }

    #[test]
    fn surrogate_is_derivative_of_smooth_spike() {
        let h = 1e-6;
        for &x in &[-2.0, -0.3, 0.0, 0.1, 1.7] {
            let fd = (smooth_spike(x + h, 2.0) - smooth_spike(x - h, 2.0)) / (2.0 * h);
            assert!((fd - surrogate_grad(x, 2.0)).abs() < 1e-8, "x={x}");
        }
    }
}
