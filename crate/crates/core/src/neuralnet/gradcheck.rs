//! Central finite-difference verification of the reverse-mode engine.
//!
//! For every layer type we build a tiny network, take the scalar loss
//! `L = Σ y²` over the network output, and compare every engine gradient
//! entry against `(L(θ+h) − L(θ−h)) / 2h` with `h = 1e-5`.

use super::network::{backward, forward, Mode};
use super::params::{init_params, GradientSet, Parameters};
use super::spec::{BiasKind, LayerSpec, NetworkSpec};
use super::tensor::Tensor;
use crate::linalg::rng::SplitMix64;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_input(spec: &NetworkSpec, batch: usize, seed: u64) -> Tensor {
    let (h, w, c) = spec.input;
    let mut rng = SplitMix64::new(seed);
    Tensor::from_vec(
        batch,
        h,
        w,
        c,
        (0..batch * h * w * c).map(|_| rng.next_gaussian()).collect(),
    )
    .unwrap()
}

/// Loss of a train-mode forward pass on a scratch copy of the parameters, so
/// batch-norm running-statistic updates never leak between evaluations.
fn loss_of(spec: &NetworkSpec, params: &Parameters, x: &Tensor) -> f64 {
    let mut scratch = params.clone();
    let (y, _) = forward(spec, &mut scratch, x, Mode::Train).unwrap();
    y.data().iter().map(|v| v * v).sum()
}

/// Entries excluded from training (and therefore from the check): the
/// structural zero diagonal of a self-expressive block.
fn skip_entry(name: &str, dims: &[usize], i: usize) -> bool {
    name.ends_with(".theta") && dims.len() == 2 && i % dims[1] == i / dims[1]
}

fn engine_gradients(spec: &NetworkSpec, params: &Parameters, x: &Tensor) -> GradientSet {
    let mut scratch = params.clone();
    let (y, tape) = forward(spec, &mut scratch, x, Mode::Train).unwrap();
    let (n, h, w, c) = y.shape();
    let upstream =
        Tensor::from_vec(n, h, w, c, y.data().iter().map(|v| 2.0 * v).collect()).unwrap();
    let mut grads = GradientSet::zeros_like(params);
    backward(spec, &scratch, &tape, &upstream, &mut grads).unwrap();
    grads
}

/// Asserts every trainable gradient entry agrees with central finite
/// differences within `TOL` relative error. Returns the worst deviation.
fn check_network(spec: &NetworkSpec, params: &Parameters, batch: usize, seed: u64) -> f64 {
    let x = random_input(spec, batch, seed);
    let grads = engine_gradients(spec, params, &x);
    let mut worst: f64 = 0.0;
    for block in grads.blocks() {
        for i in 0..block.values.len() {
            if skip_entry(&block.name, &block.dims, i) {
                continue;
            }
            let mut plus = params.clone();
            plus.block_mut(&block.name).unwrap().values[i] += H;
            let mut minus = params.clone();
            minus.block_mut(&block.name).unwrap().values[i] -= H;
            let fd = (loss_of(spec, &plus, &x) - loss_of(spec, &minus, &x)) / (2.0 * H);
            let got = block.values[i];
            let rel = (got - fd).abs() / (got.abs() + fd.abs()).max(1e-6);
            assert!(
                rel <= TOL,
                "{}[{}]: engine {} vs finite difference {} (rel {rel})",
                block.name,
                i,
                got,
                fd
            );
            worst = worst.max(rel);
        }
    }
    worst
}

fn conv(
    kernel: usize,
    stride: usize,
    ci: usize,
    co: usize,
    bias: BiasKind,
    batch_norm: bool,
) -> LayerSpec {
    LayerSpec::Conv2d {
        kernel: (kernel, kernel),
        stride,
        in_channels: ci,
        out_channels: co,
        bias,
        batch_norm,
    }
}

fn deconv(
    kernel: usize,
    stride: usize,
    ci: usize,
    co: usize,
    bias: BiasKind,
    batch_norm: bool,
) -> LayerSpec {
    LayerSpec::ConvTranspose2d {
        kernel: (kernel, kernel),
        stride,
        in_channels: ci,
        out_channels: co,
        bias,
        batch_norm,
    }
}

#[test]
fn dense_layers_pass_finite_difference_check() {
    let spec = NetworkSpec {
        input: (1, 1, 4),
        layers: vec![
            LayerSpec::Dense {
                in_dim: 4,
                out_dim: 5,
                bias: true,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                in_dim: 5,
                out_dim: 3,
                bias: false,
            },
        ],
        encoder_len: 2,
    };
    let params = init_params(&spec, 1).unwrap();
    check_network(&spec, &params, 3, 10);
}

#[test]
fn strided_conv_layers_pass_finite_difference_check() {
    let spec = NetworkSpec {
        input: (5, 5, 2),
        layers: vec![
            conv(3, 2, 2, 3, BiasKind::PerOutput, false),
            LayerSpec::Relu,
            conv(3, 1, 3, 2, BiasKind::PerOutput, false),
        ],
        encoder_len: 2,
    };
    let params = init_params(&spec, 2).unwrap();
    check_network(&spec, &params, 2, 11);
}

#[test]
fn batch_norm_conv_passes_finite_difference_check() {
    let spec = NetworkSpec {
        input: (4, 4, 1),
        layers: vec![
            conv(3, 1, 1, 3, BiasKind::None, true),
            LayerSpec::Relu,
            conv(1, 1, 3, 1, BiasKind::PerOutput, false),
        ],
        encoder_len: 2,
    };
    let params = init_params(&spec, 3).unwrap();
    check_network(&spec, &params, 3, 12);
}

#[test]
fn transposed_conv_layers_pass_finite_difference_check() {
    // Covers both bias placements: per-output on the first transposed layer,
    // per-input on the second.
    let spec = NetworkSpec {
        input: (3, 3, 2),
        layers: vec![
            deconv(3, 2, 2, 3, BiasKind::PerOutput, false),
            LayerSpec::Relu,
            deconv(3, 1, 3, 1, BiasKind::PerInput, false),
        ],
        encoder_len: 2,
    };
    let params = init_params(&spec, 4).unwrap();
    check_network(&spec, &params, 2, 13);
}

#[test]
fn batch_norm_transposed_conv_passes_finite_difference_check() {
    let spec = NetworkSpec {
        input: (3, 3, 2),
        layers: vec![deconv(3, 2, 2, 2, BiasKind::None, true), LayerSpec::Relu],
        encoder_len: 2,
    };
    let params = init_params(&spec, 5).unwrap();
    check_network(&spec, &params, 2, 14);
}

#[test]
fn self_expressive_layer_passes_finite_difference_check() {
    let spec = NetworkSpec {
        input: (1, 1, 3),
        layers: vec![
            LayerSpec::Dense {
                in_dim: 3,
                out_dim: 3,
                bias: true,
            },
            LayerSpec::SelfExpressive { n: 4 },
            LayerSpec::Dense {
                in_dim: 3,
                out_dim: 3,
                bias: true,
            },
        ],
        encoder_len: 1,
    };
    let mut params = init_params(&spec, 6).unwrap();
    // make the coefficient block nonzero off the diagonal so its gradient
    // path is exercised away from the zero initialization
    let mut rng = SplitMix64::new(77);
    {
        let theta = params.block_mut("layer1.theta").unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    theta.values[i * 4 + j] = 0.3 * rng.next_gaussian();
                }
            }
        }
    }
    check_network(&spec, &params, 4, 15);
}

#[test]
fn mirrored_autoencoder_passes_finite_difference_check() {
    // conv encoder + transposed-conv decoder, the shape every preset uses
    let spec = NetworkSpec {
        input: (4, 4, 1),
        layers: vec![
            conv(3, 2, 1, 2, BiasKind::PerOutput, false),
            LayerSpec::Relu,
            deconv(3, 2, 2, 1, BiasKind::PerOutput, false),
        ],
        encoder_len: 2,
    };
    let params = init_params(&spec, 7).unwrap();
    check_network(&spec, &params, 2, 16);
}
