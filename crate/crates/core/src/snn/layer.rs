//! Synaptic current computation for dense and convolutional layers, and
//! the matching vector-Jacobian products.

use alloc::vec;

use super::LayerSpec;

/// Writes the synaptic current `W * input` into `out`.
///
/// With `binary` set the input is known to be 0/1 and only active inputs
/// are summed.
pub(crate) fn current(spec: &LayerSpec, w: &[f64], input: &[f64], out: &mut [f64], binary: bool) {
    match *spec {
        LayerSpec::Dense { inputs, .. } => {
            if binary {
                let active: alloc::vec::Vec<usize> = input
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(i, _)| i)
                    .collect();
                for (o, row) in out.iter_mut().zip(w.chunks_exact(inputs)) {
                    *o = active.iter().map(|&i| row[i]).sum();
                }
            } else {
                for (o, row) in out.iter_mut().zip(w.chunks_exact(inputs)) {
                    *o = row.iter().zip(input).map(|(a, b)| a * b).sum();
                }
            }
        }
        LayerSpec::Conv { in_channels, out_channels, kernel, height, width, pool } => {
            let (oh, ow) = spec.conv_out();
            let mut raw = vec![0.0; out_channels * oh * ow];
            for oc in 0..out_channels {
                for ic in 0..in_channels {
                    let plane = &input[ic * height * width..(ic + 1) * height * width];
                    let kbase = (oc * in_channels + ic) * kernel * kernel;
                    for ki in 0..kernel {
                        for kj in 0..kernel {
                            let wk = w[kbase + ki * kernel + kj];
                            if wk == 0.0 {
                                continue;
                            }
                            for y in 0..oh {
                                let src = &plane[(y + ki) * width + kj..(y + ki) * width + kj + ow];
                                let dst = &mut raw[(oc * oh + y) * ow..(oc * oh + y + 1) * ow];
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d += wk * s;
                                }
                            }
                        }
                    }
                }
            }
            pool_forward(&raw, out, out_channels, oh, ow, pool);
        }
    }
}

fn pool_forward(raw: &[f64], out: &mut [f64], channels: usize, oh: usize, ow: usize, pool: usize) {
    if pool == 1 {
        out.copy_from_slice(raw);
        return;
    }
    let (ph, pw) = (oh / pool, ow / pool);
    let scale = 1.0 / (pool * pool) as f64;
    for c in 0..channels {
        for py in 0..ph {
            for px in 0..pw {
                let mut acc = 0.0;
                for dy in 0..pool {
                    let row = (c * oh + py * pool + dy) * ow + px * pool;
                    acc += raw[row..row + pool].iter().sum::<f64>();
                }
                out[(c * ph + py) * pw + px] = acc * scale;
            }
        }
    }
}

/// Accumulates `d_current ⊗ input` into `d_w` and, when requested, adds
/// `Wᵀ d_current` into `d_input`.
pub(crate) fn backprop(
    spec: &LayerSpec,
    w: &[f64],
    input: &[f64],
    d_current: &[f64],
    d_w: &mut [f64],
    d_input: Option<&mut [f64]>,
) {
    match *spec {
        LayerSpec::Dense { inputs, .. } => {
            for (g, row_grad) in d_current.iter().zip(d_w.chunks_exact_mut(inputs)) {
                if *g == 0.0 {
                    continue;
                }
                for (dw, x) in row_grad.iter_mut().zip(input) {
                    *dw += g * x;
                }
            }
            if let Some(d_in) = d_input {
                for (g, row) in d_current.iter().zip(w.chunks_exact(inputs)) {
                    if *g == 0.0 {
                        continue;
                    }
                    for (d, wv) in d_in.iter_mut().zip(row) {
                        *d += g * wv;
                    }
                }
            }
        }
        LayerSpec::Conv { in_channels, out_channels, kernel, height, width, pool } => {
            let (oh, ow) = spec.conv_out();
            let mut d_raw = vec![0.0; out_channels * oh * ow];
            pool_backward(d_current, &mut d_raw, out_channels, oh, ow, pool);
            let mut d_in = d_input;
            for oc in 0..out_channels {
                for ic in 0..in_channels {
                    let plane = &input[ic * height * width..(ic + 1) * height * width];
                    let kbase = (oc * in_channels + ic) * kernel * kernel;
                    for ki in 0..kernel {
                        for kj in 0..kernel {
                            let mut acc = 0.0;
                            for y in 0..oh {
                                let src = &plane[(y + ki) * width + kj..(y + ki) * width + kj + ow];
                                let g = &d_raw[(oc * oh + y) * ow..(oc * oh + y + 1) * ow];
                                acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                            }
                            d_w[kbase + ki * kernel + kj] += acc;
                            if let Some(d_in) = d_in.as_deref_mut() {
                                let wk = w[kbase + ki * kernel + kj];
                                let dplane =
                                    &mut d_in[ic * height * width..(ic + 1) * height * width];
                                for y in 0..oh {
                                    let g = &d_raw[(oc * oh + y) * ow..(oc * oh + y + 1) * ow];
                                    let dst = &mut dplane
                                        [(y + ki) * width + kj..(y + ki) * width + kj + ow];
                                    for (d, gv) in dst.iter_mut().zip(g) {
                                        *d += wk * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

fn pool_backward(d_out: &[f64], d_raw: &mut [f64], channels: usize, oh: usize, ow: usize, pool: usize) {
    if pool == 1 {
        d_raw.copy_from_slice(d_out);
        return;
    }
    let (ph, pw) = (oh / pool, ow / pool);
    let scale = 1.0 / (pool * pool) as f64;
    for c in 0..channels {
        for py in 0..ph {
            for px in 0..pw {
                let g = d_out[(c * ph + py) * pw + px] * scale;
                for dy in 0..pool {
                    let row = (c * oh + py * pool + dy) * ow + px * pool;
                    for d in &mut d_raw[row..row + pool] {
                        *d = g;
                    }
                }
            }
        }
    }
}
