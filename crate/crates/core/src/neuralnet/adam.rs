//! Adam optimizer with bias correction.

use super::params::{is_trainable, GradientSet, Parameters};
use super::NeuralError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moments per trainable block, plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    names: Vec<String>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        let trainable: Vec<_> = params
            .blocks()
            .iter()
            .filter(|b| is_trainable(&b.name))
            .collect();
        Self {
            m: trainable.iter().map(|b| vec![0.0; b.values.len()]).collect(),
            v: trainable.iter().map(|b| vec![0.0; b.values.len()]).collect(),
            names: trainable.iter().map(|b| b.name.clone()).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update over every trainable block.
pub fn adam_step(
    params: &mut Parameters,
    grads: &GradientSet,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<(), NeuralError> {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for (slot, name) in state.names.iter().enumerate() {
        let grad = grads.block(name)?;
        let block = params.block_mut(name)?;
        if grad.values.len() != block.values.len() {
            return Err(NeuralError::ShapeMismatch {
                context: "adam update",
                expected: format!("{} values", block.values.len()),
                got: format!("{} values", grad.values.len()),
            });
        }
        let m = &mut state.m[slot];
        let v = &mut state.v[slot];
        for i in 0..block.values.len() {
            let g = grad.values[i];
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            block.values[i] -= learning_rate * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::spec::{preset, LayerSpec, NetworkSpec};
    use crate::neuralnet::params::{init_params, GradientSet};

    fn scalar_spec() -> NetworkSpec {
        NetworkSpec {
            input: (1, 1, 1),
            layers: vec![LayerSpec::Dense {
                in_dim: 1,
                out_dim: 1,
                bias: false,
            }],
            encoder_len: 1,
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let spec = preset("mlp-small").unwrap();
        let mut params = init_params(&spec, 2).unwrap();
        let before = params.clone();
        let grads = GradientSet::zeros_like(&params);
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, 0.1).unwrap();
        assert_eq!(params, before);
        assert!(state.m.iter().flatten().all(|&v| v == 0.0));
        assert!(state.v.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // With bias correction, one step on any constant nonzero gradient
        // moves each value by lr * g/|g| (up to epsilon).
        let spec = scalar_spec();
        let mut params = init_params(&spec, 0).unwrap();
        let w0 = params.block("layer0.kernel").unwrap().values[0];
        let mut grads = GradientSet::zeros_like(&params);
        grads.block_mut("layer0.kernel").unwrap().values[0] = 0.37;
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, 0.01).unwrap();
        let w1 = params.block("layer0.kernel").unwrap().values[0];
        assert!(((w0 - w1) - 0.01).abs() < 1e-6, "step was {}", w0 - w1);
    }

    #[test]
    fn quadratic_loss_decreases_over_ten_steps() {
        // f(w) = w^2, gradient 2w, starting from w = 1.
        let spec = scalar_spec();
        let mut params = init_params(&spec, 0).unwrap();
        params.block_mut("layer0.kernel").unwrap().values[0] = 1.0;
        let mut state = AdamState::new(&params);
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let w = params.block("layer0.kernel").unwrap().values[0];
            let loss = w * w;
            assert!(loss < last, "loss must strictly decrease: {loss} vs {last}");
            last = loss;
            let mut grads = GradientSet::zeros_like(&params);
            grads.block_mut("layer0.kernel").unwrap().values[0] = 2.0 * w;
            adam_step(&mut params, &grads, &mut state, 0.05).unwrap();
        }
    }
}
