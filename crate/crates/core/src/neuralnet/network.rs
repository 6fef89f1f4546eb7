//! Tape-based forward and reverse passes over a layer range.
//!
//! A forward pass records, per layer, exactly the values its backward rule
//! needs. [`backward`] replays the tape in reverse, accumulating into a
//! [`GradientSet`] and returning the gradient with respect to the range's
//! input, so callers can stage a network in segments (encoder, coefficient
//! step, decoder) and chain the segment gradients.

use super::layers::{
    add_channel_bias, bn_backward, bn_forward_eval, bn_forward_train, channel_sums, conv_forward,
    conv_grad_input, conv_grad_kernel, BnCache, KernelDims,
};
use super::params::{
    bias_name, bn_beta_name, bn_gamma_name, bn_mean_name, bn_var_name, kernel_name, theta_name,
    GradientSet, Parameters,
};
use super::spec::{BiasKind, LayerSpec, NetworkSpec};
use super::tensor::Tensor;
use super::NeuralError;
use crate::linalg::Matrix;
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum LayerCache {
    Conv {
        /// Layer input after any input-side bias.
        xb: Tensor,
        bn: Option<BnCache>,
    },
    ConvT {
        xb: Tensor,
        bn: Option<BnCache>,
    },
    Dense {
        x: Matrix,
        in_shape: (usize, usize, usize, usize),
    },
    Relu {
        mask: Vec<bool>,
    },
    StopGradient,
    SelfExpressive {
        z: Matrix,
        in_shape: (usize, usize, usize, usize),
    },
}

/// Record of one forward pass over a layer range.
#[derive(Debug)]
pub struct Tape {
    mode: Mode,
    start: usize,
    caches: Vec<LayerCache>,
    out_shape: (usize, usize, usize, usize),
}

/// Runs layers `range` on `input`. Train mode updates batch-norm running
/// statistics in `params`; eval mode leaves `params` untouched and produces
/// a tape that [`backward`] will reject.
pub fn forward_range(
    spec: &NetworkSpec,
    params: &mut Parameters,
    range: Range<usize>,
    input: &Tensor,
    mode: Mode,
) -> Result<(Tensor, Tape), NeuralError> {
    if range.end > spec.layers.len() || range.start > range.end {
        return Err(NeuralError::InvalidSpec(format!(
            "layer range {range:?} outside 0..{}",
            spec.layers.len()
        )));
    }
    let expected = spec.shape_at(range.start)?;
    let (_, h, w, c) = input.shape();
    if (h, w, c) != expected {
        return Err(NeuralError::ShapeMismatch {
            context: "forward input",
            expected: format!("{expected:?}"),
            got: format!("{:?}", (h, w, c)),
        });
    }
    let start = range.start;
    let mut cur = input.clone();
    let mut caches = Vec::with_capacity(range.len());
    for index in range {
        let layer = &spec.layers[index];
        cur = apply_layer(layer, index, params, cur, mode, &mut caches)?;
    }
    let out_shape = cur.shape();
    Ok((
        cur,
        Tape {
            mode,
            start,
            caches,
            out_shape,
        },
    ))
}

/// Full-network forward pass.
pub fn forward(
    spec: &NetworkSpec,
    params: &mut Parameters,
    input: &Tensor,
    mode: Mode,
) -> Result<(Tensor, Tape), NeuralError> {
    forward_range(spec, params, 0..spec.layers.len(), input, mode)
}

fn apply_layer(
    layer: &LayerSpec,
    index: usize,
    params: &mut Parameters,
    cur: Tensor,
    mode: Mode,
    caches: &mut Vec<LayerCache>,
) -> Result<Tensor, NeuralError> {
    match *layer {
        LayerSpec::Conv2d {
            kernel: (kh, kw),
            stride,
            in_channels,
            out_channels,
            bias,
            batch_norm,
        } => {
            let kd = KernelDims {
                kh,
                kw,
                ci: in_channels,
                co: out_channels,
            };
            let mut xb = cur;
            if bias == BiasKind::PerInput {
                let b = params.block(&bias_name(index))?.values.clone();
                add_channel_bias(&mut xb, &b);
            }
            let kernel = &params.block(&kernel_name(index))?.values;
            let mut y = conv_forward(&xb, kernel, kd, stride);
            if bias == BiasKind::PerOutput {
                let b = params.block(&bias_name(index))?.values.clone();
                add_channel_bias(&mut y, &b);
            }
            let bn = if batch_norm {
                let (out, cache) = run_batch_norm(index, params, &y, mode)?;
                y = out;
                cache
            } else {
                None
            };
            caches.push(LayerCache::Conv { xb, bn });
            Ok(y)
        }
        LayerSpec::ConvTranspose2d {
            kernel: (kh, kw),
            stride,
            in_channels,
            out_channels,
            bias,
            batch_norm,
        } => {
            // The stored kernel belongs to the underlying forward convolution
            // mapping the (large) output back to the (small) input.
            let kd = KernelDims {
                kh,
                kw,
                ci: out_channels,
                co: in_channels,
            };
            let mut xb = cur;
            if bias == BiasKind::PerInput {
                let b = params.block(&bias_name(index))?.values.clone();
                add_channel_bias(&mut xb, &b);
            }
            let (_, h, w, _) = xb.shape();
            let kernel = &params.block(&kernel_name(index))?.values;
            let mut y = conv_grad_input(&xb, kernel, kd, stride, (h * stride, w * stride));
            if bias == BiasKind::PerOutput {
                let b = params.block(&bias_name(index))?.values.clone();
                add_channel_bias(&mut y, &b);
            }
            let bn = if batch_norm {
                let (out, cache) = run_batch_norm(index, params, &y, mode)?;
                y = out;
                cache
            } else {
                None
            };
            caches.push(LayerCache::ConvT { xb, bn });
            Ok(y)
        }
        LayerSpec::Dense {
            in_dim,
            out_dim,
            bias,
        } => {
            if cur.features_per_sample() != in_dim {
                return Err(NeuralError::ShapeMismatch {
                    context: "dense layer input",
                    expected: format!("{in_dim} features"),
                    got: format!("{} features", cur.features_per_sample()),
                });
            }
            let in_shape = cur.shape();
            let x = cur.to_matrix();
            let w = block_as_matrix(params, &kernel_name(index), in_dim, out_dim)?;
            let mut y = x.matmul(&w).expect("dense shape already checked");
            if bias {
                let b = &params.block(&bias_name(index))?.values;
                for r in 0..y.rows() {
                    for (c, bv) in b.iter().enumerate() {
                        y.set(r, c, y.get(r, c) + bv);
                    }
                }
            }
            caches.push(LayerCache::Dense { x, in_shape });
            Tensor::from_matrix(&y, 1, 1, out_dim)
        }
        LayerSpec::Relu => {
            let mask: Vec<bool> = cur.data().iter().map(|&v| v > 0.0).collect();
            let mut y = cur;
            for v in y.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            caches.push(LayerCache::Relu { mask });
            Ok(y)
        }
        LayerSpec::StopGradient => {
            caches.push(LayerCache::StopGradient);
            Ok(cur)
        }
        LayerSpec::SelfExpressive { n } => {
            if cur.batch() != n {
                return Err(NeuralError::ShapeMismatch {
                    context: "self-expressive layer",
                    expected: format!("batch of {n}"),
                    got: format!("batch of {}", cur.batch()),
                });
            }
            let in_shape = cur.shape();
            let z = cur.to_matrix();
            let theta = block_as_matrix(params, &theta_name(index), n, n)?;
            let y = theta.matmul(&z).expect("self-expressive shape checked");
            let (_, h, w, c) = in_shape;
            let out = Tensor::from_matrix(&y, h, w, c)?;
            caches.push(LayerCache::SelfExpressive { z, in_shape });
            Ok(out)
        }
    }
}

fn run_batch_norm(
    index: usize,
    params: &mut Parameters,
    y: &Tensor,
    mode: Mode,
) -> Result<(Tensor, Option<BnCache>), NeuralError> {
    let gamma = params.block(&bn_gamma_name(index))?.values.clone();
    let beta = params.block(&bn_beta_name(index))?.values.clone();
    match mode {
        Mode::Train => {
            let mut mean = params.block(&bn_mean_name(index))?.values.clone();
            let mut var = params.block(&bn_var_name(index))?.values.clone();
            let (out, cache) = bn_forward_train(y, &gamma, &beta, &mut mean, &mut var);
            params.block_mut(&bn_mean_name(index))?.values = mean;
            params.block_mut(&bn_var_name(index))?.values = var;
            Ok((out, Some(cache)))
        }
        Mode::Eval => {
            let mean = &params.block(&bn_mean_name(index))?.values;
            let var = &params.block(&bn_var_name(index))?.values;
            Ok((bn_forward_eval(y, &gamma, &beta, mean, var), None))
        }
    }
}

fn block_as_matrix(
    params: &Parameters,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<Matrix, NeuralError> {
    let block = params.block(name)?;
    if block.dims != [rows, cols] {
        return Err(NeuralError::ShapeMismatch {
            context: "parameter block",
            expected: format!("[{rows}, {cols}]"),
            got: format!("{:?}", block.dims),
        });
    }
    Ok(Matrix::from_parts(rows, cols, block.values.clone()))
}

/// Replays `tape` in reverse. Accumulates parameter gradients into `grads`
/// (callers may chain several backward passes into one set) and returns the
/// gradient with respect to the range input.
pub fn backward(
    spec: &NetworkSpec,
    params: &Parameters,
    tape: &Tape,
    upstream: &Tensor,
    grads: &mut GradientSet,
) -> Result<Tensor, NeuralError> {
    if tape.mode != Mode::Train {
        return Err(NeuralError::StaleTape);
    }
    if upstream.shape() != tape.out_shape {
        return Err(NeuralError::ShapeMismatch {
            context: "backward upstream gradient",
            expected: format!("{:?}", tape.out_shape),
            got: format!("{:?}", upstream.shape()),
        });
    }
    let mut cur = upstream.clone();
    for (pos, cache) in tape.caches.iter().enumerate().rev() {
        let index = tape.start + pos;
        let layer = &spec.layers[index];
        cur = backward_layer(layer, index, params, cache, cur, grads)?;
    }
    Ok(cur)
}

fn backward_layer(
    layer: &LayerSpec,
    index: usize,
    params: &Parameters,
    cache: &LayerCache,
    upstream: Tensor,
    grads: &mut GradientSet,
) -> Result<Tensor, NeuralError> {
    match (layer, cache) {
        (
            &LayerSpec::Conv2d {
                kernel: (kh, kw),
                stride,
                in_channels,
                out_channels,
                bias,
                ..
            },
            LayerCache::Conv { xb, bn },
        ) => {
            let kd = KernelDims {
                kh,
                kw,
                ci: in_channels,
                co: out_channels,
            };
            let d = apply_bn_backward(index, params, bn, upstream, grads)?;
            if bias == BiasKind::PerOutput {
                accumulate(grads, &bias_name(index), &channel_sums(&d))?;
            }
            let kernel = &params.block(&kernel_name(index))?.values;
            let dk = conv_grad_kernel(xb, &d, kd, stride);
            accumulate(grads, &kernel_name(index), &dk)?;
            let (_, h, w, _) = xb.shape();
            let dxb = conv_grad_input(&d, kernel, kd, stride, (h, w));
            if bias == BiasKind::PerInput {
                accumulate(grads, &bias_name(index), &channel_sums(&dxb))?;
            }
            Ok(dxb)
        }
        (
            &LayerSpec::ConvTranspose2d {
                kernel: (kh, kw),
                stride,
                in_channels,
                out_channels,
                bias,
                ..
            },
            LayerCache::ConvT { xb, bn },
        ) => {
            let kd = KernelDims {
                kh,
                kw,
                ci: out_channels,
                co: in_channels,
            };
            let d = apply_bn_backward(index, params, bn, upstream, grads)?;
            if bias == BiasKind::PerOutput {
                accumulate(grads, &bias_name(index), &channel_sums(&d))?;
            }
            // The forward map was the adjoint of a convolution, so the kernel
            // gradient swaps the roles of input and upstream, and the input
            // gradient is the forward convolution itself.
            let dk = conv_grad_kernel(&d, xb, kd, stride);
            accumulate(grads, &kernel_name(index), &dk)?;
            let kernel = &params.block(&kernel_name(index))?.values;
            let dxb = conv_forward(&d, kernel, kd, stride);
            if bias == BiasKind::PerInput {
                accumulate(grads, &bias_name(index), &channel_sums(&dxb))?;
            }
            Ok(dxb)
        }
        (
            &LayerSpec::Dense {
                in_dim,
                out_dim,
                bias,
            },
            LayerCache::Dense { x, in_shape },
        ) => {
            let d = upstream.to_matrix();
            let dw = x.transpose().matmul(&d).expect("dense backward shapes");
            accumulate(grads, &kernel_name(index), dw.data())?;
            if bias {
                let mut db = vec![0.0; out_dim];
                for r in 0..d.rows() {
                    for (c, slot) in db.iter_mut().enumerate() {
                        *slot += d.get(r, c);
                    }
                }
                accumulate(grads, &bias_name(index), &db)?;
            }
            let w = block_as_matrix(params, &kernel_name(index), in_dim, out_dim)?;
            let dx = d.matmul(&w.transpose()).expect("dense backward shapes");
            let (_, h, wd, c) = *in_shape;
            Tensor::from_matrix(&dx, h, wd, c)
        }
        (LayerSpec::Relu, LayerCache::Relu { mask }) => {
            let mut d = upstream;
            for (v, &keep) in d.data_mut().iter_mut().zip(mask) {
                if !keep {
                    *v = 0.0;
                }
            }
            Ok(d)
        }
        (LayerSpec::StopGradient, LayerCache::StopGradient) => {
            let (n, h, w, c) = upstream.shape();
            Ok(Tensor::zeros(n, h, w, c))
        }
        (&LayerSpec::SelfExpressive { n }, LayerCache::SelfExpressive { z, in_shape }) => {
            let d = upstream.to_matrix();
            let mut dtheta = d.matmul(&z.transpose()).expect("self-expressive backward");
            for i in 0..n {
                dtheta.set(i, i, 0.0);
            }
            accumulate(grads, &theta_name(index), dtheta.data())?;
            let theta = block_as_matrix(params, &theta_name(index), n, n)?;
            let dz = theta.transpose().matmul(&d).expect("self-expressive backward");
            let (_, h, w, c) = *in_shape;
            Tensor::from_matrix(&dz, h, w, c)
        }
        _ => Err(NeuralError::StaleTape),
    }
}

fn apply_bn_backward(
    index: usize,
    params: &Parameters,
    bn: &Option<BnCache>,
    upstream: Tensor,
    grads: &mut GradientSet,
) -> Result<Tensor, NeuralError> {
    match bn {
        None => Ok(upstream),
        Some(cache) => {
            let gamma = &params.block(&bn_gamma_name(index))?.values;
            let (dx, dgamma, dbeta) = bn_backward(&upstream, cache, gamma);
            accumulate(grads, &bn_gamma_name(index), &dgamma)?;
            accumulate(grads, &bn_beta_name(index), &dbeta)?;
            Ok(dx)
        }
    }
}

fn accumulate(grads: &mut GradientSet, name: &str, values: &[f64]) -> Result<(), NeuralError> {
    let block = grads.block_mut(name)?;
    debug_assert_eq!(block.values.len(), values.len());
    for (slot, v) in block.values.iter_mut().zip(values) {
        *slot += v;
    }
    Ok(())
}
