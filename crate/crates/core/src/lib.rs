//! Deep subspace clustering with a closed-form self-expressive map.
//!
//! The library trains a convolutional auto-encoder whose latent codes are
//! passed through a parameter-free self-expression step: the coefficient
//! matrix that reconstructs every latent sample from all the others is read
//! off a single regularized Gram inverse instead of being learned as an
//! extra network layer. The coefficients then feed a standard spectral
//! clustering stage.
//!
//! Module map:
//! - [`linalg`]: deterministic dense kernels (Cholesky, symmetric eigen,
//!   k-means) shared by everything else.
//! - [`selfexpress`]: the closed-form coefficient solver and its oracle.
//! - [`neuralnet`]: a small NHWC auto-encoder engine with exact gradients.
//! - [`pipeline`]: end-to-end training loops for the closed-form method and
//!   the learnable self-expressive-layer baseline.
//! - [`spectral`]: affinity construction and normalized spectral clustering.
//! - [`evaldata`]: clustering-error metric, synthetic data, file formats.

pub mod evaldata;
pub mod linalg;
pub mod neuralnet;
pub mod pipeline;
pub mod selfexpress;
pub mod spectral;

pub use evaldata::{clustering_error, SyntheticSpec};
pub use linalg::Matrix;
pub use neuralnet::{BiasKind, LayerSpec, NetworkSpec, Parameters, Tensor};
pub use pipeline::{FitResult, Method, NumericWidth, TrainConfig};
pub use selfexpress::{
    compute_b, compute_p, solve_self_expression, CoefficientMatrix, PrecisionMatrix,
};
pub use spectral::{
    build_affinity, cluster_from_coefficients, spectral_cluster, AffinityMatrix, ClusterConfig,
};
