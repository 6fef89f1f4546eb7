//! Training objectives.

use super::NeuralError;
use crate::linalg::Matrix;
use crate::selfexpress::CoefficientMatrix;

/// Squared Frobenius norm of the reconstruction residual.
pub fn reconstruction_loss(x: &Matrix, x_recon: &Matrix) -> Result<f64, NeuralError> {
    if x.rows() != x_recon.rows() || x.cols() != x_recon.cols() {
        return Err(NeuralError::ShapeMismatch {
            context: "reconstruction loss",
            expected: format!("{}x{}", x.rows(), x.cols()),
            got: format!("{}x{}", x_recon.rows(), x_recon.cols()),
        });
    }
    let mut sum = 0.0;
    for (a, b) in x.data().iter().zip(x_recon.data()) {
        let d = a - b;
        sum += d * d;
    }
    Ok(sum)
}

/// Baseline training objective with a trainable coefficient block:
/// reconstruction + `lambda1`·coefficient penalty + `lambda2/2`·self-expression
/// residual. With `squared_theta_penalty` the penalty is the squared
/// Frobenius norm (the convention the reference implementation uses); the
/// plain-norm variant is kept selectable.
#[allow(clippy::too_many_arguments)]
pub fn dsc_loss(
    x: &Matrix,
    x_recon: &Matrix,
    z: &Matrix,
    z_se: &Matrix,
    theta_sel: &CoefficientMatrix,
    lambda1: f64,
    lambda2: f64,
    squared_theta_penalty: bool,
) -> Result<f64, NeuralError> {
    if z.rows() != z_se.rows() || z.cols() != z_se.cols() {
        return Err(NeuralError::ShapeMismatch {
            context: "self-expression residual term",
            expected: format!("{}x{}", z.rows(), z.cols()),
            got: format!("{}x{}", z_se.rows(), z_se.cols()),
        });
    }
    let recon = reconstruction_loss(x, x_recon)?;
    let theta_sq = theta_sel.values().frobenius_norm_sq();
    let penalty = if squared_theta_penalty {
        theta_sq
    } else {
        theta_sq.sqrt()
    };
    let mut se = 0.0;
    for (a, b) in z.data().iter().zip(z_se.data()) {
        let d = a - b;
        se += d * d;
    }
    Ok(recon + lambda1 * penalty + lambda2 / 2.0 * se)
}
