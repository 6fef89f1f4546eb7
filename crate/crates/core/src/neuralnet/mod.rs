//! Minimal differentiable-network engine.
//!
//! Supports exactly what the auto-encoder presets need: dense layers, 2-D
//! convolutions and transposed convolutions with TensorFlow-style `SAME`
//! padding, rectifier activations, batch normalization, a stop-gradient
//! node, and an N×N self-expressive layer. Forward passes record a tape;
//! [`backward`] replays it in reverse for exact gradients, verified against
//! central finite differences in the test suite. Updates use Adam.
//!
//! Everything runs on the CPU in `f64`, single-threaded and bit-deterministic.

mod adam;
mod layers;
mod loss;
mod network;
mod params;
mod spec;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use loss::{dsc_loss, reconstruction_loss};
pub use network::{backward, forward, forward_range, Mode, Tape};
pub use params::{
    init_params, load_checkpoint, save_checkpoint, CheckpointError, GradientSet, ParamBlock,
    Parameters,
};
pub use spec::{preset, preset_names, BiasKind, LayerParams, LayerSpec, NetworkSpec};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("tape is stale: backward requires a tape recorded by a train-mode forward pass")]
    StaleTape,
    #[error("unknown parameter block {0}")]
    UnknownBlock(String),
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

#[cfg(test)]
mod gradcheck;
