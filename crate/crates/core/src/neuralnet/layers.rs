//! Computational primitives: `SAME`-padded convolution (forward, input
//! gradient, kernel gradient) and batch normalization. Transposed
//! convolution is realized as the exact adjoint of a forward convolution,
//! so the three convolution kernels cover both directions.

use super::spec::div_ceil;
use super::tensor::Tensor;

/// Kernel dimensions of the underlying forward convolution:
/// (kernel_h, kernel_w, input channels, output channels).
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelDims {
    pub kh: usize,
    pub kw: usize,
    pub ci: usize,
    pub co: usize,
}

impl KernelDims {
    #[inline]
    fn idx(&self, kh: usize, kw: usize, ci: usize, co: usize) -> usize {
        ((kh * self.kw + kw) * self.ci + ci) * self.co + co
    }
}

/// Leading pad for `SAME` semantics: the total pad is split with the smaller
/// half first, the convention used by the reference implementations of these
/// architectures.
fn same_pad_beg(in_size: usize, out_size: usize, kernel: usize, stride: usize) -> usize {
    let needed = (out_size - 1) * stride + kernel;
    needed.saturating_sub(in_size) / 2
}

/// Forward convolution, stride `s`, output spatial size `ceil(in / s)`.
pub(crate) fn conv_forward(x: &Tensor, kernel: &[f64], kd: KernelDims, stride: usize) -> Tensor {
    let (n, h, w, c) = x.shape();
    debug_assert_eq!(c, kd.ci);
    debug_assert_eq!(kernel.len(), kd.kh * kd.kw * kd.ci * kd.co);
    let oh = div_ceil(h, stride);
    let ow = div_ceil(w, stride);
    let pad_h = same_pad_beg(h, oh, kd.kh, stride);
    let pad_w = same_pad_beg(w, ow, kd.kw, stride);
    let mut y = Tensor::zeros(n, oh, ow, kd.co);
    for b in 0..n {
        for out_r in 0..oh {
            for out_c in 0..ow {
                for co in 0..kd.co {
                    let mut acc = 0.0;
                    for kr in 0..kd.kh {
                        let ir = (out_r * stride + kr) as isize - pad_h as isize;
                        if ir < 0 || ir >= h as isize {
                            continue;
                        }
                        for kc in 0..kd.kw {
                            let ic = (out_c * stride + kc) as isize - pad_w as isize;
                            if ic < 0 || ic >= w as isize {
                                continue;
                            }
                            for ci in 0..kd.ci {
                                acc += x.get(b, ir as usize, ic as usize, ci)
                                    * kernel[kd.idx(kr, kc, ci, co)];
                            }
                        }
                    }
                    y.set(b, out_r, out_c, co, acc);
                }
            }
        }
    }
    y
}

/// Gradient of a forward convolution with respect to its input — also the
/// forward map of the transposed convolution.
pub(crate) fn conv_grad_input(
    dy: &Tensor,
    kernel: &[f64],
    kd: KernelDims,
    stride: usize,
    in_hw: (usize, usize),
) -> Tensor {
    let (n, oh, ow, co) = dy.shape();
    debug_assert_eq!(co, kd.co);
    let (h, w) = in_hw;
    let pad_h = same_pad_beg(h, oh, kd.kh, stride);
    let pad_w = same_pad_beg(w, ow, kd.kw, stride);
    let mut dx = Tensor::zeros(n, h, w, kd.ci);
    for b in 0..n {
        for out_r in 0..oh {
            for out_c in 0..ow {
                for co_i in 0..co {
                    let g = dy.get(b, out_r, out_c, co_i);
                    if g == 0.0 {
                        continue;
                    }
                    for kr in 0..kd.kh {
                        let ir = (out_r * stride + kr) as isize - pad_h as isize;
                        if ir < 0 || ir >= h as isize {
                            continue;
                        }
                        for kc in 0..kd.kw {
                            let ic = (out_c * stride + kc) as isize - pad_w as isize;
                            if ic < 0 || ic >= w as isize {
                                continue;
                            }
                            for ci in 0..kd.ci {
                                let i = dx.idx(b, ir as usize, ic as usize, ci);
                                dx.data_mut()[i] += g * kernel[kd.idx(kr, kc, ci, co_i)];
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Gradient of a forward convolution with respect to its kernel.
pub(crate) fn conv_grad_kernel(x: &Tensor, dy: &Tensor, kd: KernelDims, stride: usize) -> Vec<f64> {
    let (n, h, w, _) = x.shape();
    let (n2, oh, ow, _) = dy.shape();
    debug_assert_eq!(n, n2);
    let pad_h = same_pad_beg(h, oh, kd.kh, stride);
    let pad_w = same_pad_beg(w, ow, kd.kw, stride);
    let mut dk = vec![0.0; kd.kh * kd.kw * kd.ci * kd.co];
    for b in 0..n {
        for out_r in 0..oh {
            for out_c in 0..ow {
                for co in 0..kd.co {
                    let g = dy.get(b, out_r, out_c, co);
                    if g == 0.0 {
                        continue;
                    }
                    for kr in 0..kd.kh {
                        let ir = (out_r * stride + kr) as isize - pad_h as isize;
                        if ir < 0 || ir >= h as isize {
                            continue;
                        }
                        for kc in 0..kd.kw {
                            let ic = (out_c * stride + kc) as isize - pad_w as isize;
                            if ic < 0 || ic >= w as isize {
                                continue;
                            }
                            for ci in 0..kd.ci {
                                dk[kd.idx(kr, kc, ci, co)] +=
                                    g * x.get(b, ir as usize, ic as usize, ci);
                            }
                        }
                    }
                }
            }
        }
    }
    dk
}

/// Adds a per-channel bias in place.
pub(crate) fn add_channel_bias(x: &mut Tensor, bias: &[f64]) {
    let (_, _, _, c) = x.shape();
    debug_assert_eq!(bias.len(), c);
    for (i, v) in x.data_mut().iter_mut().enumerate() {
        *v += bias[i % c];
    }
}

/// Per-channel sums of a tensor — the bias gradient.
pub(crate) fn channel_sums(x: &Tensor) -> Vec<f64> {
    let (_, _, _, c) = x.shape();
    let mut sums = vec![0.0; c];
    for (i, v) in x.data().iter().enumerate() {
        sums[i % c] += v;
    }
    sums
}

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.9;

/// Values backward needs from a train-mode batch-norm forward pass.
#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    pub xhat: Tensor,
    pub invstd: Vec<f64>,
}

/// Train-mode batch norm over (batch, height, width) per channel, biased
/// variance. Updates the running statistics in place with momentum 0.9.
pub(crate) fn bn_forward_train(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &mut [f64],
    running_var: &mut [f64],
) -> (Tensor, BnCache) {
    let (n, h, w, c) = x.shape();
    let m = (n * h * w) as f64;
    let mut mean = vec![0.0; c];
    for (i, v) in x.data().iter().enumerate() {
        mean[i % c] += v;
    }
    for v in &mut mean {
        *v /= m;
    }
    let mut var = vec![0.0; c];
    for (i, v) in x.data().iter().enumerate() {
        let d = v - mean[i % c];
        var[i % c] += d * d;
    }
    for v in &mut var {
        *v /= m;
    }
    let invstd: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();

    let mut xhat = Tensor::zeros(n, h, w, c);
    for (i, v) in x.data().iter().enumerate() {
        xhat.data_mut()[i] = (v - mean[i % c]) * invstd[i % c];
    }
    let mut y = Tensor::zeros(n, h, w, c);
    for (i, v) in xhat.data().iter().enumerate() {
        y.data_mut()[i] = gamma[i % c] * v + beta[i % c];
    }
    for ch in 0..c {
        running_mean[ch] = BN_MOMENTUM * running_mean[ch] + (1.0 - BN_MOMENTUM) * mean[ch];
        running_var[ch] = BN_MOMENTUM * running_var[ch] + (1.0 - BN_MOMENTUM) * var[ch];
    }
    (y, BnCache { xhat, invstd })
}

/// Eval-mode batch norm: a fixed affine map built from the running
/// statistics.
pub(crate) fn bn_forward_eval(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
) -> Tensor {
    let (n, h, w, c) = x.shape();
    let invstd: Vec<f64> = running_var
        .iter()
        .map(|v| 1.0 / (v + BN_EPS).sqrt())
        .collect();
    let mut y = Tensor::zeros(n, h, w, c);
    for (i, v) in x.data().iter().enumerate() {
        let ch = i % c;
        y.data_mut()[i] = gamma[ch] * (v - running_mean[ch]) * invstd[ch] + beta[ch];
    }
    y
}

/// Batch-norm backward from the cached normalized values. Returns
/// (input gradient, scale gradient, shift gradient).
pub(crate) fn bn_backward(
    dy: &Tensor,
    cache: &BnCache,
    gamma: &[f64],
) -> (Tensor, Vec<f64>, Vec<f64>) {
    let (n, h, w, c) = dy.shape();
    let m = (n * h * w) as f64;
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for (i, g) in dy.data().iter().enumerate() {
        let ch = i % c;
        dgamma[ch] += g * cache.xhat.data()[i];
        dbeta[ch] += g;
    }
    let mut dx = Tensor::zeros(n, h, w, c);
    for (i, g) in dy.data().iter().enumerate() {
        let ch = i % c;
        dx.data_mut()[i] = gamma[ch] * cache.invstd[ch] / m
            * (m * g - dbeta[ch] - cache.xhat.data()[i] * dgamma[ch]);
    }
    (dx, dgamma, dbeta)
}
