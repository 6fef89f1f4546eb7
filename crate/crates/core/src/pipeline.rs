//! Training loops: auto-encoder pretraining, the closed-form training loop,
//! and the learnable-coefficient baseline.
//!
//! All training is full batch — the closed-form coefficient step needs the
//! entire latent matrix every iteration, so mini-batching is undefined here.
//! Every loop is deterministic for a fixed seed: one logical thread, seeded
//! initialization, bit-stable kernels underneath.
//!
//! The closed-form loop body (one epoch):
//! 1. encode the batch to latent rows `Z`,
//! 2. solve the zero-diagonal ridge problem for `B` in closed form,
//! 3. treat `B` as a constant (stop-gradient), form `B·Z`,
//! 4. decode and take the squared reconstruction error,
//! 5. update encoder and decoder with Adam.
//!
//! The gradient therefore reaches the encoder only through the latent
//! operand of `B·Z`, never through `B`'s own dependence on the latent code.

use crate::linalg::{LinalgError, Matrix};
use crate::neuralnet::{
    adam_step, backward, dsc_loss, forward_range, init_params, reconstruction_loss, AdamState,
    GradientSet, Mode, NetworkSpec, NeuralError, Parameters, Tensor,
};
use crate::selfexpress::{solve_self_expression, CoefficientMatrix, SelfExpressError};
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericWidth {
    W32,
    W64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dcfsc,
    Dsc,
    Shallow,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dcfsc => "dcfsc",
            Method::Dsc => "dsc",
            Method::Shallow => "shallow",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Ridge weight of the closed-form coefficient solve.
    pub lambda: f64,
    /// Coefficient-penalty weight of the baseline objective.
    pub lambda1: f64,
    /// Self-expression-residual weight of the baseline objective.
    pub lambda2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// 32-bit mode rounds parameter storage to `f32` after every update;
    /// arithmetic stays in `f64`.
    pub numeric_width: NumericWidth,
    /// Squared coefficient penalty (the reference convention) versus the
    /// plain Frobenius norm.
    pub squared_theta_penalty: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
            learning_rate: 0.001,
            epochs: 200,
            seed: 0,
            numeric_width: NumericWidth::W64,
            squared_theta_penalty: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Final-iteration coefficient matrix (diagonal exactly zero).
    pub coefficient: CoefficientMatrix,
    pub final_params: Parameters,
    /// One loss value per epoch.
    pub loss_history: Vec<f64>,
    /// Wall-clock seconds per epoch, aligned with `loss_history`.
    pub epoch_seconds: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    SelfExpress(#[from] SelfExpressError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("training diverged: non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn data_tensor(spec: &NetworkSpec, data: &Matrix) -> Result<Tensor, PipelineError> {
    let (h, w, c) = spec.input;
    Ok(Tensor::from_matrix(data, h, w, c)?)
}

fn maybe_round(params: &mut Parameters, width: NumericWidth) {
    if width == NumericWidth::W32 {
        params.round_to_f32();
    }
}

/// Minimizes the plain reconstruction error by full-batch Adam, bypassing
/// any coefficient step. Zero epochs return the given parameters unchanged.
pub fn pretrain_from(
    spec: &NetworkSpec,
    mut params: Parameters,
    data: &Matrix,
    config: &TrainConfig,
) -> Result<Parameters, PipelineError> {
    spec.validate()?;
    let x = data_tensor(spec, data)?;
    let mut adam = AdamState::new(&params);
    maybe_round(&mut params, config.numeric_width);
    for epoch in 0..config.epochs {
        let (loss, grads) = autoencoder_gradients(spec, &mut params, data, &x)?;
        if !loss.is_finite() {
            return Err(PipelineError::NonFiniteLoss { epoch, loss });
        }
        adam_step(&mut params, &grads, &mut adam, config.learning_rate)?;
        maybe_round(&mut params, config.numeric_width);
    }
    Ok(params)
}

/// [`pretrain_from`] starting at seeded initial parameters.
pub fn pretrain_autoencoder(
    spec: &NetworkSpec,
    data: &Matrix,
    config: &TrainConfig,
) -> Result<Parameters, PipelineError> {
    let params = init_params(spec, config.seed)?;
    pretrain_from(spec, params, data, config)
}

fn autoencoder_gradients(
    spec: &NetworkSpec,
    params: &mut Parameters,
    data: &Matrix,
    x: &Tensor,
) -> Result<(f64, GradientSet), PipelineError> {
    let (z, enc_tape) = forward_range(spec, params, 0..spec.encoder_len, x, Mode::Train)?;
    let dec_range = spec.decoder_start()..spec.layers.len();
    let (recon_t, dec_tape) = forward_range(spec, params, dec_range, &z, Mode::Train)?;
    let recon = recon_t.to_matrix();
    let loss = reconstruction_loss(data, &recon)?;
    let mut grads = GradientSet::zeros_like(params);
    let upstream = residual_gradient(data, &recon_t);
    let dz = backward(spec, params, &dec_tape, &upstream, &mut grads)?;
    backward(spec, params, &enc_tape, &dz, &mut grads)?;
    Ok((loss, grads))
}

/// Gradient of the squared reconstruction error with respect to the
/// reconstruction: `2 (recon − data)`, shaped like the network output.
fn residual_gradient(data: &Matrix, recon: &Tensor) -> Tensor {
    let (n, h, w, c) = recon.shape();
    let mut out = Tensor::zeros(n, h, w, c);
    for (i, slot) in out.data_mut().iter_mut().enumerate() {
        *slot = 2.0 * (recon.data()[i] - data.data()[i]);
    }
    out
}

/// One closed-form training step at the current parameters: returns the
/// epoch loss, the parameter gradients, and the coefficient matrix the step
/// used. Exposed so the stop-gradient semantics can be verified against
/// finite differences of [`dcfsc_surrogate_loss`].
pub fn dcfsc_gradients(
    spec: &NetworkSpec,
    params: &mut Parameters,
    data: &Matrix,
    lambda: f64,
) -> Result<(f64, GradientSet, CoefficientMatrix), PipelineError> {
    let x = data_tensor(spec, data)?;
    let (z_t, enc_tape) = forward_range(spec, params, 0..spec.encoder_len, &x, Mode::Train)?;
    let (_, lh, lw, lc) = z_t.shape();
    let z = z_t.to_matrix();
    let b = solve_self_expression(&z, lambda)?;
    // From here on the coefficient matrix is a constant of the step.
    let z_se = b.values().matmul(&z)?;
    let z_se_t = Tensor::from_matrix(&z_se, lh, lw, lc)?;
    let dec_range = spec.decoder_start()..spec.layers.len();
    let (recon_t, dec_tape) = forward_range(spec, params, dec_range, &z_se_t, Mode::Train)?;
    let loss = reconstruction_loss(data, &recon_t.to_matrix())?;

    let mut grads = GradientSet::zeros_like(params);
    let upstream = residual_gradient(data, &recon_t);
    let dz_se = backward(spec, params, &dec_tape, &upstream, &mut grads)?;
    // d/dZ of B̄·Z with B̄ held constant.
    let dz = b.values().transpose().matmul(&dz_se.to_matrix())?;
    let dz_t = Tensor::from_matrix(&dz, lh, lw, lc)?;
    backward(spec, params, &enc_tape, &dz_t, &mut grads)?;
    Ok((loss, grads, b))
}

/// Reconstruction loss of one closed-form step with the coefficient matrix
/// frozen at `b`. The engine gradient of a step must match central finite
/// differences of this function.
pub fn dcfsc_surrogate_loss(
    spec: &NetworkSpec,
    params: &Parameters,
    data: &Matrix,
    b: &CoefficientMatrix,
) -> Result<f64, PipelineError> {
    let mut scratch = params.clone();
    let x = data_tensor(spec, data)?;
    let (z_t, _) = forward_range(spec, &mut scratch, 0..spec.encoder_len, &x, Mode::Train)?;
    let (_, lh, lw, lc) = z_t.shape();
    let z_se = b.values().matmul(&z_t.to_matrix())?;
    let z_se_t = Tensor::from_matrix(&z_se, lh, lw, lc)?;
    let dec_range = spec.decoder_start()..spec.layers.len();
    let (recon_t, _) = forward_range(spec, &mut scratch, dec_range, &z_se_t, Mode::Train)?;
    Ok(reconstruction_loss(data, &recon_t.to_matrix())?)
}

/// Closed-form training from given initial parameters. Each epoch recomputes
/// the coefficient matrix from the current latent code; the returned
/// coefficient is the one the final epoch used. Zero epochs compute it
/// directly from the initial parameters (eval-mode encoder) without touching
/// them.
pub fn fit_dcfsc_from(
    spec: &NetworkSpec,
    mut params: Parameters,
    data: &Matrix,
    config: &TrainConfig,
) -> Result<FitResult, PipelineError> {
    spec.validate()?;
    if spec.self_expressive_index().is_some() {
        return Err(PipelineError::InvalidConfig(
            "closed-form training takes a spec without a trainable coefficient layer".into(),
        ));
    }
    if config.lambda.is_nan() || config.lambda <= 0.0 {
        return Err(PipelineError::InvalidConfig(format!(
            "lambda must be strictly positive, got {}",
            config.lambda
        )));
    }
    maybe_round(&mut params, config.numeric_width);
    let mut adam = AdamState::new(&params);
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut epoch_seconds = Vec::with_capacity(config.epochs);
    let mut coefficient = None;
    for epoch in 0..config.epochs {
        let t0 = Instant::now();
        let (loss, grads, b) = dcfsc_gradients(spec, &mut params, data, config.lambda)?;
        if !loss.is_finite() {
            return Err(PipelineError::NonFiniteLoss { epoch, loss });
        }
        adam_step(&mut params, &grads, &mut adam, config.learning_rate)?;
        maybe_round(&mut params, config.numeric_width);
        loss_history.push(loss);
        epoch_seconds.push(t0.elapsed().as_secs_f64());
        coefficient = Some(b);
    }
    let coefficient = match coefficient {
        Some(b) => b,
        None => {
            let x = data_tensor(spec, data)?;
            let mut scratch = params.clone();
            let (z_t, _) =
                forward_range(spec, &mut scratch, 0..spec.encoder_len, &x, Mode::Eval)?;
            solve_self_expression(&z_t.to_matrix(), config.lambda)?
        }
    };
    Ok(FitResult {
        coefficient,
        final_params: params,
        loss_history,
        epoch_seconds,
    })
}

/// [`fit_dcfsc_from`] starting at seeded initial parameters.
pub fn fit_dcfsc(
    spec: &NetworkSpec,
    data: &Matrix,
    config: &TrainConfig,
) -> Result<FitResult, PipelineError> {
    let params = init_params(spec, config.seed)?;
    fit_dcfsc_from(spec, params, data, config)
}

fn dsc_gradients(
    spec: &NetworkSpec,
    params: &mut Parameters,
    data: &Matrix,
    x: &Tensor,
    config: &TrainConfig,
) -> Result<(f64, GradientSet), PipelineError> {
    let se_idx = spec
        .self_expressive_index()
        .expect("checked by fit_dsc_baseline");
    let theta_block = format!("layer{se_idx}.theta");
    let (z_t, enc_tape) = forward_range(spec, params, 0..spec.encoder_len, x, Mode::Train)?;
    let (_, lh, lw, lc) = z_t.shape();
    let (z_se_t, se_tape) = forward_range(spec, params, se_idx..se_idx + 1, &z_t, Mode::Train)?;
    let dec_range = spec.decoder_start()..spec.layers.len();
    let (recon_t, dec_tape) = forward_range(spec, params, dec_range, &z_se_t, Mode::Train)?;

    let z = z_t.to_matrix();
    let z_se = z_se_t.to_matrix();
    let n = z.rows();
    let theta_values = params.block(&theta_block)?.values.clone();
    let theta = CoefficientMatrix::new(Matrix::from_parts(n, n, theta_values))?;
    let loss = dsc_loss(
        data,
        &recon_t.to_matrix(),
        &z,
        &z_se,
        &theta,
        config.lambda1,
        config.lambda2,
        config.squared_theta_penalty,
    )?;

    let mut grads = GradientSet::zeros_like(params);
    let upstream = residual_gradient(data, &recon_t);
    let dz_se_dec = backward(spec, params, &dec_tape, &upstream, &mut grads)?;
    // add the latent-residual term's gradient with respect to the mixed code
    let mut dz_se = dz_se_dec.to_matrix();
    for (slot, (a, b)) in dz_se
        .data_mut()
        .iter_mut()
        .zip(z_se.data().iter().zip(z.data()))
    {
        *slot += config.lambda2 * (a - b);
    }
    let dz_se_t = Tensor::from_matrix(&dz_se, lh, lw, lc)?;
    let dz_from_se = backward(spec, params, &se_tape, &dz_se_t, &mut grads)?;
    // coefficient-penalty gradient (diagonal stays structurally zero)
    {
        let theta_sq_norm = theta.values().frobenius_norm_sq();
        let dtheta = grads.block_mut(&theta_block)?;
        if config.squared_theta_penalty {
            for (g, t) in dtheta.values.iter_mut().zip(theta.values().data()) {
                *g += 2.0 * config.lambda1 * t;
            }
        } else if theta_sq_norm > 0.0 {
            let norm = theta_sq_norm.sqrt();
            for (g, t) in dtheta.values.iter_mut().zip(theta.values().data()) {
                *g += config.lambda1 * t / norm;
            }
        }
        for i in 0..n {
            dtheta.values[i * n + i] = 0.0;
        }
    }
    let mut dz = dz_from_se.to_matrix();
    for (slot, (a, b)) in dz
        .data_mut()
        .iter_mut()
        .zip(z.data().iter().zip(z_se.data()))
    {
        *slot += config.lambda2 * (a - b);
    }
    let dz_t = Tensor::from_matrix(&dz, lh, lw, lc)?;
    backward(spec, params, &enc_tape, &dz_t, &mut grads)?;
    Ok((loss, grads))
}

/// Baseline training from given initial parameters: joint full-batch Adam
/// over encoder, trainable coefficient block, and decoder. The coefficient
/// block starts at zero and its diagonal never trains.
pub fn fit_dsc_baseline_from(
    spec: &NetworkSpec,
    mut params: Parameters,
    data: &Matrix,
    config: &TrainConfig,
) -> Result<FitResult, PipelineError> {
    spec.validate()?;
    let se_idx = spec.self_expressive_index().ok_or_else(|| {
        PipelineError::InvalidConfig(
            "baseline training needs a trainable self-expressive layer in the architecture".into(),
        )
    })?;
    if config.lambda1 < 0.0 || config.lambda2 < 0.0 {
        return Err(PipelineError::InvalidConfig(
            "lambda1 and lambda2 must be non-negative".into(),
        ));
    }
    let x = data_tensor(spec, data)?;
    maybe_round(&mut params, config.numeric_width);
    let mut adam = AdamState::new(&params);
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut epoch_seconds = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let t0 = Instant::now();
        let (loss, grads) = dsc_gradients(spec, &mut params, data, &x, config)?;
        if !loss.is_finite() {
            return Err(PipelineError::NonFiniteLoss { epoch, loss });
        }
        adam_step(&mut params, &grads, &mut adam, config.learning_rate)?;
        maybe_round(&mut params, config.numeric_width);
        loss_history.push(loss);
        epoch_seconds.push(t0.elapsed().as_secs_f64());
    }
    let theta_values = params.block(&format!("layer{se_idx}.theta"))?.values.clone();
    let n = data.rows();
    let coefficient = CoefficientMatrix::new(Matrix::from_parts(n, n, theta_values))?;
    Ok(FitResult {
        coefficient,
        final_params: params,
        loss_history,
        epoch_seconds,
    })
}

/// [`fit_dsc_baseline_from`] starting at seeded initial parameters.
pub fn fit_dsc_baseline(
    spec: &NetworkSpec,
    data: &Matrix,
    config: &TrainConfig,
) -> Result<FitResult, PipelineError> {
    let params = init_params(spec, config.seed)?;
    fit_dsc_baseline_from(spec, params, data, config)
}

/// Writes one tab-separated record per epoch: index, loss, wall seconds.
pub fn write_training_log(
    path: &Path,
    loss_history: &[f64],
    epoch_seconds: &[f64],
) -> io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (epoch, (loss, secs)) in loss_history.iter().zip(epoch_seconds).enumerate() {
        writeln!(out, "{epoch}\t{loss}\t{secs}")?;
    }
    out.flush()
}
