//! Architecture descriptions, shape propagation, parameter auditing, and the
//! built-in benchmark presets.

use super::NeuralError;
use serde::{Deserialize, Serialize};

/// Where a layer's additive bias lives.
///
/// `PerInput` adds a per-channel bias to the layer's *input* before the
/// (transposed) convolution is applied. The mirrored single-layer
/// auto-encoder preset uses it on its decoder so the decoder carries the
/// same 50-value bias as the encoder it mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    None,
    PerOutput,
    PerInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// 2-D convolution, `SAME` padding, square stride. Output spatial size is
    /// `ceil(in / stride)`. With `batch_norm` the layer carries no bias and
    /// owns 4 batch-norm values per output channel (scale, shift, running
    /// mean, running variance).
    Conv2d {
        kernel: (usize, usize),
        stride: usize,
        in_channels: usize,
        out_channels: usize,
        bias: BiasKind,
        batch_norm: bool,
    },
    /// Transposed 2-D convolution, the exact adjoint of a `SAME`-padded
    /// convolution. Output spatial size is `in * stride`.
    ConvTranspose2d {
        kernel: (usize, usize),
        stride: usize,
        in_channels: usize,
        out_channels: usize,
        bias: BiasKind,
        batch_norm: bool,
    },
    /// Fully connected layer on the flattened sample.
    Dense {
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    },
    /// Rectifier activation.
    Relu,
    /// Identity forward; blocks all gradient flow backward.
    StopGradient,
    /// Trainable N×N zero-diagonal map mixing the latent rows of the batch.
    /// Requires the batch size to equal `n`.
    SelfExpressive { n: usize },
}

impl LayerSpec {
    /// Number of stored values (trainable weights plus batch-norm running
    /// statistics), with a short printable label. Layers without parameters
    /// return zero.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                kernel: (kh, kw),
                in_channels,
                out_channels,
                bias,
                batch_norm,
                ..
            }
            | LayerSpec::ConvTranspose2d {
                kernel: (kh, kw),
                in_channels,
                out_channels,
                bias,
                batch_norm,
                ..
            } => {
                let bias_count = match bias {
                    BiasKind::None => 0,
                    BiasKind::PerOutput => out_channels,
                    BiasKind::PerInput => in_channels,
                };
                let bn = if batch_norm { 4 * out_channels } else { 0 };
                kh * kw * in_channels * out_channels + bias_count + bn
            }
            LayerSpec::Dense {
                in_dim,
                out_dim,
                bias,
            } => in_dim * out_dim + if bias { out_dim } else { 0 },
            LayerSpec::Relu | LayerSpec::StopGradient => 0,
            LayerSpec::SelfExpressive { n } => n * n,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            LayerSpec::Conv2d {
                kernel: (kh, kw),
                stride,
                in_channels,
                out_channels,
                ..
            } => format!("conv {kh}x{kw}/{stride} {in_channels}->{out_channels}"),
            LayerSpec::ConvTranspose2d {
                kernel: (kh, kw),
                stride,
                in_channels,
                out_channels,
                ..
            } => format!("deconv {kh}x{kw}/{stride} {in_channels}->{out_channels}"),
            LayerSpec::Dense { in_dim, out_dim, .. } => format!("dense {in_dim}->{out_dim}"),
            LayerSpec::Relu => "relu".to_string(),
            LayerSpec::StopGradient => "stop-gradient".to_string(),
            LayerSpec::SelfExpressive { n } => format!("self-expressive {n}x{n}"),
        }
    }
}

/// One row of a parameter audit.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub index: usize,
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Per-sample input shape (height, width, channels).
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    /// Layers `0..encoder_len` form the encoder. A self-expressive layer, if
    /// any, must sit at index `encoder_len`; the decoder is everything after.
    pub encoder_len: usize,
}

impl NetworkSpec {
    /// Shape after applying layers `0..upto` to the input shape.
    pub fn shape_at(&self, upto: usize) -> Result<(usize, usize, usize), NeuralError> {
        let mut shape = self.input;
        for (i, layer) in self.layers.iter().take(upto).enumerate() {
            shape = propagate(shape, layer)
                .map_err(|e| NeuralError::InvalidSpec(format!("layer {i}: {e}")))?;
        }
        Ok(shape)
    }

    pub fn output_shape(&self) -> Result<(usize, usize, usize), NeuralError> {
        self.shape_at(self.layers.len())
    }

    /// Index of the self-expressive layer, if present.
    pub fn self_expressive_index(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| matches!(l, LayerSpec::SelfExpressive { .. }))
    }

    /// First decoder layer index (skips the self-expressive layer if any).
    pub fn decoder_start(&self) -> usize {
        match self.self_expressive_index() {
            Some(i) => i + 1,
            None => self.encoder_len,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let (h, w, c) = self.input;
        if h == 0 || w == 0 || c == 0 {
            return Err(NeuralError::InvalidSpec("zero input dimension".into()));
        }
        if self.encoder_len > self.layers.len() {
            return Err(NeuralError::InvalidSpec(format!(
                "encoder_len {} exceeds layer count {}",
                self.encoder_len,
                self.layers.len()
            )));
        }
        let se_count = self
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::SelfExpressive { .. }))
            .count();
        if se_count > 1 {
            return Err(NeuralError::InvalidSpec(
                "at most one self-expressive layer is supported".into(),
            ));
        }
        if let Some(i) = self.self_expressive_index() {
            if i != self.encoder_len {
                return Err(NeuralError::InvalidSpec(format!(
                    "self-expressive layer at index {i} must sit at encoder_len {}",
                    self.encoder_len
                )));
            }
        }
        for layer in &self.layers {
            if let LayerSpec::Conv2d {
                bias, batch_norm, ..
            }
            | LayerSpec::ConvTranspose2d {
                bias, batch_norm, ..
            } = layer
            {
                if *batch_norm && *bias != BiasKind::None {
                    return Err(NeuralError::InvalidSpec(
                        "a batch-normalized layer carries no bias".into(),
                    ));
                }
            }
        }
        // shape propagation must succeed end to end
        self.output_shape()?;
        Ok(())
    }

    /// Audit of stored values per parameterized layer, in network order.
    pub fn param_breakdown(&self) -> Vec<LayerParams> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.param_count() > 0)
            .map(|(index, l)| LayerParams {
                index,
                label: l.label(),
                count: l.param_count(),
            })
            .collect()
    }

    pub fn param_total(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }
}

fn propagate(
    (h, w, c): (usize, usize, usize),
    layer: &LayerSpec,
) -> Result<(usize, usize, usize), String> {
    match *layer {
        LayerSpec::Conv2d {
            stride,
            in_channels,
            out_channels,
            ..
        } => {
            if c != in_channels {
                return Err(format!("expected {in_channels} input channels, got {c}"));
            }
            if stride == 0 {
                return Err("stride must be at least 1".into());
            }
            Ok((div_ceil(h, stride), div_ceil(w, stride), out_channels))
        }
        LayerSpec::ConvTranspose2d {
            stride,
            in_channels,
            out_channels,
            ..
        } => {
            if c != in_channels {
                return Err(format!("expected {in_channels} input channels, got {c}"));
            }
            if stride == 0 {
                return Err("stride must be at least 1".into());
            }
            Ok((h * stride, w * stride, out_channels))
        }
        LayerSpec::Dense { in_dim, out_dim, .. } => {
            if h * w * c != in_dim {
                return Err(format!(
                    "expected {in_dim} flattened inputs, got {h}x{w}x{c}"
                ));
            }
            Ok((1, 1, out_dim))
        }
        LayerSpec::Relu | LayerSpec::StopGradient | LayerSpec::SelfExpressive { .. } => {
            Ok((h, w, c))
        }
    }
}

pub(crate) fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

fn conv(
    kernel: usize,
    stride: usize,
    in_channels: usize,
    out_channels: usize,
    bias: BiasKind,
    batch_norm: bool,
) -> LayerSpec {
    LayerSpec::Conv2d {
        kernel: (kernel, kernel),
        stride,
        in_channels,
        out_channels,
        bias,
        batch_norm,
    }
}

fn deconv(
    kernel: usize,
    stride: usize,
    in_channels: usize,
    out_channels: usize,
    bias: BiasKind,
    batch_norm: bool,
) -> LayerSpec {
    LayerSpec::ConvTranspose2d {
        kernel: (kernel, kernel),
        stride,
        in_channels,
        out_channels,
        bias,
        batch_norm,
    }
}

pub const PRESET_NAMES: [&str; 7] = [
    "eyaleb-dcfsc",
    "eyaleb-dsc",
    "orl-dcfsc",
    "orl-dsc",
    "coil100-dcfsc",
    "coil100-dsc",
    "mlp-small",
];

pub fn preset_names() -> &'static [&'static str] {
    &PRESET_NAMES
}

/// Built-in architectures: the three published benchmark auto-encoders in
/// both closed-form (no trainable coefficient block) and baseline (trainable
/// N×N self-expressive layer) variants, plus a small dense auto-encoder for
/// synthetic data.
pub fn preset(name: &str) -> Option<NetworkSpec> {
    use BiasKind::{PerInput, PerOutput};
    let spec = match name {
        // 48x48 faces; three stride-2 convs to a 6x6x30 latent code.
        "eyaleb-dcfsc" | "eyaleb-dsc" => {
            let mut layers = vec![
                conv(5, 2, 1, 10, PerOutput, false),
                LayerSpec::Relu,
                conv(3, 2, 10, 20, PerOutput, false),
                LayerSpec::Relu,
                conv(3, 2, 20, 30, PerOutput, false),
                LayerSpec::Relu,
            ];
            let encoder_len = layers.len();
            if name == "eyaleb-dsc" {
                layers.push(LayerSpec::SelfExpressive { n: 2432 });
            }
            layers.extend([
                deconv(3, 2, 30, 20, PerOutput, false),
                LayerSpec::Relu,
                deconv(3, 2, 20, 10, PerOutput, false),
                LayerSpec::Relu,
                deconv(5, 2, 10, 1, PerOutput, false),
            ]);
            NetworkSpec {
                input: (48, 48, 1),
                layers,
                encoder_len,
            }
        }
        // 32x32 faces; three stride-2 convs to a 4x4x3 latent code.
        "orl-dcfsc" | "orl-dsc" => {
            let mut layers = vec![
                conv(5, 2, 1, 5, PerOutput, false),
                LayerSpec::Relu,
                conv(3, 2, 5, 3, PerOutput, false),
                LayerSpec::Relu,
                conv(3, 2, 3, 3, PerOutput, false),
                LayerSpec::Relu,
            ];
            let encoder_len = layers.len();
            if name == "orl-dsc" {
                layers.push(LayerSpec::SelfExpressive { n: 400 });
            }
            layers.extend([
                deconv(3, 2, 3, 3, PerOutput, false),
                LayerSpec::Relu,
                deconv(3, 2, 3, 5, PerOutput, false),
                LayerSpec::Relu,
                deconv(5, 2, 5, 1, PerOutput, false),
            ]);
            NetworkSpec {
                input: (32, 32, 1),
                layers,
                encoder_len,
            }
        }
        // 32x32 objects; batch-normalized five-layer encoder to 8x8x72.
        "coil100-dcfsc" => NetworkSpec {
            input: (32, 32, 1),
            layers: vec![
                conv(5, 1, 1, 24, BiasKind::None, true),
                LayerSpec::Relu,
                conv(3, 2, 24, 24, BiasKind::None, true),
                LayerSpec::Relu,
                conv(3, 1, 24, 48, BiasKind::None, true),
                LayerSpec::Relu,
                conv(3, 2, 48, 48, BiasKind::None, true),
                LayerSpec::Relu,
                conv(1, 1, 48, 72, PerOutput, false),
                LayerSpec::Relu,
                deconv(1, 1, 72, 48, BiasKind::None, true),
                LayerSpec::Relu,
                deconv(3, 2, 48, 48, BiasKind::None, true),
                LayerSpec::Relu,
                deconv(3, 1, 48, 24, BiasKind::None, true),
                LayerSpec::Relu,
                deconv(3, 2, 24, 24, BiasKind::None, true),
                LayerSpec::Relu,
                deconv(5, 1, 24, 1, PerOutput, false),
            ],
            encoder_len: 10,
        },
        // 32x32 objects; single-layer mirrored auto-encoder around a 7200x7200
        // self-expressive layer.
        "coil100-dsc" => NetworkSpec {
            input: (32, 32, 1),
            layers: vec![
                conv(5, 2, 1, 50, PerOutput, false),
                LayerSpec::Relu,
                LayerSpec::SelfExpressive { n: 7200 },
                deconv(5, 2, 50, 1, PerInput, false),
            ],
            encoder_len: 2,
        },
        // Linear bottleneck auto-encoder for 30-dimensional synthetic data.
        "mlp-small" => NetworkSpec {
            input: (1, 1, 30),
            layers: vec![
                LayerSpec::Dense {
                    in_dim: 30,
                    out_dim: 16,
                    bias: true,
                },
                LayerSpec::Dense {
                    in_dim: 16,
                    out_dim: 30,
                    bias: true,
                },
            ],
            encoder_len: 1,
        },
        _ => return None,
    };
    debug_assert!(spec.validate().is_ok(), "preset {name} must validate");
    Some(spec)
}
