//! Parameter storage, seeded initialization, gradient containers, and the
//! binary checkpoint format.

use super::spec::{BiasKind, LayerSpec, NetworkSpec};
use super::NeuralError;
use crate::linalg::rng::SplitMix64;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

/// One named value block (a kernel, a bias vector, a batch-norm statistic…).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl ParamBlock {
    fn zeros(name: String, dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            name,
            dims,
            values: vec![0.0; len],
        }
    }

    fn filled(name: String, dims: Vec<usize>, value: f64) -> Self {
        let len = dims.iter().product();
        Self {
            name,
            dims,
            values: vec![value; len],
        }
    }
}

/// All value blocks of a network, in layer order. Running batch-norm
/// statistics live here too but are not trainable.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    blocks: Vec<ParamBlock>,
}

/// Whether a block receives gradients and Adam updates.
pub(crate) fn is_trainable(name: &str) -> bool {
    !name.ends_with(".bn_mean") && !name.ends_with(".bn_var")
}

impl Parameters {
    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Result<&ParamBlock, NeuralError> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| NeuralError::UnknownBlock(name.to_string()))
    }

    pub fn block_mut(&mut self, name: &str) -> Result<&mut ParamBlock, NeuralError> {
        self.blocks
            .iter_mut()
            .find(|b| b.name == name)
            .ok_or_else(|| NeuralError::UnknownBlock(name.to_string()))
    }

    pub fn total_values(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    /// Rounds every stored value to 32-bit precision (training-storage mode).
    pub fn round_to_f32(&mut self) {
        for block in &mut self.blocks {
            for v in &mut block.values {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Same block names and dims, in the same order.
    pub fn same_shape_as(&self, other: &Parameters) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.name == b.name && a.dims == b.dims)
    }
}

/// Gradients for the trainable blocks, in the same order as [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    blocks: Vec<ParamBlock>,
}

impl GradientSet {
    /// All-zero gradients matching the trainable blocks of `params`.
    pub fn zeros_like(params: &Parameters) -> Self {
        Self {
            blocks: params
                .blocks
                .iter()
                .filter(|b| is_trainable(&b.name))
                .map(|b| ParamBlock::zeros(b.name.clone(), b.dims.clone()))
                .collect(),
        }
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Result<&ParamBlock, NeuralError> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| NeuralError::UnknownBlock(name.to_string()))
    }

    pub fn block_mut(&mut self, name: &str) -> Result<&mut ParamBlock, NeuralError> {
        self.blocks
            .iter_mut()
            .find(|b| b.name == name)
            .ok_or_else(|| NeuralError::UnknownBlock(name.to_string()))
    }

    pub fn is_finite(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.values.iter().all(|v| v.is_finite()))
    }
}

/// Block name prefix for a layer index.
fn prefix(index: usize) -> String {
    format!("layer{index}")
}

pub(crate) fn kernel_name(index: usize) -> String {
    format!("{}.kernel", prefix(index))
}
pub(crate) fn bias_name(index: usize) -> String {
    format!("{}.bias", prefix(index))
}
pub(crate) fn bn_gamma_name(index: usize) -> String {
    format!("{}.bn_gamma", prefix(index))
}
pub(crate) fn bn_beta_name(index: usize) -> String {
    format!("{}.bn_beta", prefix(index))
}
pub(crate) fn bn_mean_name(index: usize) -> String {
    format!("{}.bn_mean", prefix(index))
}
pub(crate) fn bn_var_name(index: usize) -> String {
    format!("{}.bn_var", prefix(index))
}
pub(crate) fn theta_name(index: usize) -> String {
    format!("{}.theta", prefix(index))
}

/// Seeded initialization: He-scaled Gaussians for kernels, zero biases,
/// batch-norm scale 1 / shift 0 / running mean 0 / running variance 1, and a
/// zero self-expressive block. Deterministic per seed.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> Result<Parameters, NeuralError> {
    spec.validate()?;
    let root = SplitMix64::new(seed);
    let mut blocks = Vec::new();
    for (i, layer) in spec.layers.iter().enumerate() {
        let mut rng = root.fork(i as u64);
        match *layer {
            LayerSpec::Conv2d {
                kernel: (kh, kw),
                in_channels,
                out_channels,
                bias,
                batch_norm,
                ..
            } => {
                let dims = vec![kh, kw, in_channels, out_channels];
                blocks.push(gaussian_block(
                    kernel_name(i),
                    dims,
                    he_std(kh * kw * in_channels),
                    &mut rng,
                ));
                push_conv_extras(&mut blocks, i, in_channels, out_channels, bias, batch_norm);
            }
            LayerSpec::ConvTranspose2d {
                kernel: (kh, kw),
                in_channels,
                out_channels,
                bias,
                batch_norm,
                ..
            } => {
                // Stored as the kernel of the underlying forward convolution:
                // output channels before input channels.
                let dims = vec![kh, kw, out_channels, in_channels];
                blocks.push(gaussian_block(
                    kernel_name(i),
                    dims,
                    he_std(kh * kw * in_channels),
                    &mut rng,
                ));
                push_conv_extras(&mut blocks, i, in_channels, out_channels, bias, batch_norm);
            }
            LayerSpec::Dense {
                in_dim,
                out_dim,
                bias,
            } => {
                blocks.push(gaussian_block(
                    kernel_name(i),
                    vec![in_dim, out_dim],
                    he_std(in_dim),
                    &mut rng,
                ));
                if bias {
                    blocks.push(ParamBlock::zeros(bias_name(i), vec![out_dim]));
                }
            }
            LayerSpec::SelfExpressive { n } => {
                blocks.push(ParamBlock::zeros(theta_name(i), vec![n, n]));
            }
            LayerSpec::Relu | LayerSpec::StopGradient => {}
        }
    }
    Ok(Parameters { blocks })
}

fn push_conv_extras(
    blocks: &mut Vec<ParamBlock>,
    i: usize,
    in_channels: usize,
    out_channels: usize,
    bias: BiasKind,
    batch_norm: bool,
) {
    match bias {
        BiasKind::None => {}
        BiasKind::PerOutput => blocks.push(ParamBlock::zeros(bias_name(i), vec![out_channels])),
        BiasKind::PerInput => blocks.push(ParamBlock::zeros(bias_name(i), vec![in_channels])),
    }
    if batch_norm {
        blocks.push(ParamBlock::filled(bn_gamma_name(i), vec![out_channels], 1.0));
        blocks.push(ParamBlock::zeros(bn_beta_name(i), vec![out_channels]));
        blocks.push(ParamBlock::zeros(bn_mean_name(i), vec![out_channels]));
        blocks.push(ParamBlock::filled(bn_var_name(i), vec![out_channels], 1.0));
    }
}

fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

fn gaussian_block(name: String, dims: Vec<usize>, std: f64, rng: &mut SplitMix64) -> ParamBlock {
    let len = dims.iter().product();
    let values = (0..len).map(|_| std * rng.next_gaussian()).collect();
    ParamBlock { name, dims, values }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("malformed checkpoint: {0}")]
    MalformedFile(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] io::Error),
}

const MAGIC: &[u8; 4] = b"SKCP";
const VERSION: u32 = 1;

/// Writes every block as (name length, name, rank, dims, values), all
/// integers and values little-endian. Round-trips bit-exactly.
pub fn save_checkpoint(path: &Path, params: &Parameters) -> Result<(), CheckpointError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for block in &params.blocks {
        let name = block.name.as_bytes();
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name)?;
        out.write_all(&(block.dims.len() as u32).to_le_bytes())?;
        for &d in &block.dims {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &block.values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Parameters, CheckpointError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::MalformedFile("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(CheckpointError::MalformedFile(format!(
            "unsupported version {version}"
        )));
    }
    let mut blocks = Vec::new();
    while let Some(name_len) = read_u32_or_eof(&mut input)? {
        let mut name_bytes = vec![0u8; name_len as usize];
        input.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::MalformedFile("block name is not UTF-8".into()))?;
        let rank = read_u32(&mut input)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut buf = [0u8; 8];
            input.read_exact(&mut buf)?;
            dims.push(u64::from_le_bytes(buf) as usize);
        }
        let len: usize = dims.iter().product();
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            let mut buf = [0u8; 8];
            input.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        blocks.push(ParamBlock { name, dims, values });
    }
    if blocks.is_empty() {
        return Err(CheckpointError::MalformedFile("no blocks".into()));
    }
    Ok(Parameters { blocks })
}

fn read_u32(input: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Reads a u32 or reports a clean end-of-stream before the first byte.
fn read_u32_or_eof(input: &mut impl Read) -> Result<Option<u32>, CheckpointError> {
    let mut buf = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        let n = input.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(None);
            }
            return Err(CheckpointError::MalformedFile(
                "truncated block header".into(),
            ));
        }
        filled += n;
    }
    Ok(Some(u32::from_le_bytes(buf)))
}
