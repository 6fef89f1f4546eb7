//! Closed-form ridge self-expression.
//!
//! Given latent samples as the rows of `X` (N×d), the zero-diagonal ridge
//! problem
//!
//! ```text
//! min_B ||X - B·X||_F^2 + lambda ||B||_F^2   s.t.  diag(B) = 0
//! ```
//!
//! has an exact solution read off a single regularized Gram inverse
//! `P = (X·Xᵀ + lambda·I)⁻¹`:
//!
//! ```text
//! B[i][j] = 0           if i = j
//! B[i][j] = -P[i][j] / P[i][i]   otherwise
//! ```
//!
//! No iteration, no learned parameters. [`rowwise_ridge_oracle`] solves the
//! same problem per row through the plain normal equations and exists purely
//! as an independent check on the shortcut.

use crate::linalg::{Cholesky, LinalgError, Matrix};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelfExpressError {
    #[error("lambda must be strictly positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("precision matrix has a non-positive diagonal entry at {index}: {value}")]
    ZeroDiagonalPivot { index: usize, value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// N×N self-representation coefficients with an exactly zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    values: Matrix,
}

impl CoefficientMatrix {
    /// Wraps a square matrix, forcing the diagonal to bitwise zero.
    pub fn new(mut values: Matrix) -> Result<Self, LinalgError> {
        if values.rows() != values.cols() {
            return Err(LinalgError::DimensionMismatch {
                context: "coefficient matrix must be square",
                expected: (values.rows(), values.rows()),
                got: (values.rows(), values.cols()),
            });
        }
        for i in 0..values.rows() {
            values.set(i, i, 0.0);
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }
}

/// Inverse of the shifted Gram matrix, `(X·Xᵀ + lambda·I)⁻¹`. Symmetric and
/// positive definite by construction.
#[derive(Debug, Clone)]
pub struct PrecisionMatrix {
    values: Matrix,
}

impl PrecisionMatrix {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }
}

/// Computes `P = (X·Xᵀ + lambda·I)⁻¹` for row-sample latent matrix `X`.
///
/// A `NotPositiveDefinite` error here means lambda is too small for the
/// latent scale at 64-bit precision.
pub fn compute_p(latent: &Matrix, lambda: f64) -> Result<PrecisionMatrix, SelfExpressError> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(SelfExpressError::NonPositiveLambda(lambda));
    }
    if latent.rows() < 2 {
        return Err(SelfExpressError::TooFewSamples(latent.rows()));
    }
    let mut gram = latent.gram();
    gram.shift_diagonal(lambda);
    let chol = Cholesky::new(&gram).map_err(SelfExpressError::Linalg)?;
    Ok(PrecisionMatrix {
        values: chol.inverse(),
    })
}

/// Reads the coefficient matrix off the precision matrix elementwise:
/// `B[i][j] = -P[i][j] / P[i][i]`, zero diagonal.
pub fn compute_b(p: &PrecisionMatrix) -> Result<CoefficientMatrix, SelfExpressError> {
    let n = p.n();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let pivot = p.values.get(i, i);
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(SelfExpressError::ZeroDiagonalPivot {
                index: i,
                value: pivot,
            });
        }
        for j in 0..n {
            if i != j {
                out.set(i, j, -p.values.get(i, j) / pivot);
            }
        }
    }
    Ok(CoefficientMatrix { values: out })
}

/// The full closed-form map: latent codes in, coefficient matrix out.
pub fn solve_self_expression(
    latent: &Matrix,
    lambda: f64,
) -> Result<CoefficientMatrix, SelfExpressError> {
    compute_b(&compute_p(latent, lambda)?)
}

/// Independent verification path: solves the zero-diagonal ridge problem for
/// one row by eliminating that row's variable and solving the remaining
/// (N−1)-variable normal equations directly.
///
/// Returns a length-N vector with a structural zero at `row`.
pub fn rowwise_ridge_oracle(
    latent: &Matrix,
    lambda: f64,
    row: usize,
) -> Result<Vec<f64>, SelfExpressError> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(SelfExpressError::NonPositiveLambda(lambda));
    }
    let n = latent.rows();
    if n < 2 {
        return Err(SelfExpressError::TooFewSamples(n));
    }
    assert!(row < n, "row index out of range");
    let d = latent.cols();

    let others: Vec<usize> = (0..n).filter(|&i| i != row).collect();
    // normal equations over the other rows: (X₋ X₋ᵀ + lambda I) c = X₋ x_rowᵀ
    let m = n - 1;
    let mut a = Matrix::zeros(m, m);
    for (ai, &i) in others.iter().enumerate() {
        for (aj, &j) in others.iter().enumerate().take(ai + 1) {
            let mut s = 0.0;
            for k in 0..d {
                s += latent.get(i, k) * latent.get(j, k);
            }
            a.set(ai, aj, s);
            a.set(aj, ai, s);
        }
    }
    a.shift_diagonal(lambda);
    let mut rhs = Matrix::zeros(m, 1);
    for (ai, &i) in others.iter().enumerate() {
        let mut s = 0.0;
        for k in 0..d {
            s += latent.get(i, k) * latent.get(row, k);
        }
        rhs.set(ai, 0, s);
    }
    let sol = Cholesky::new(&a)
        .map_err(SelfExpressError::Linalg)?
        .solve(&rhs)
        .map_err(SelfExpressError::Linalg)?;

    let mut full = vec![0.0; n];
    for (ai, &i) in others.iter().enumerate() {
        full[i] = sol.get(ai, 0);
    }
    Ok(full)
}

/// Squared Frobenius norm of `X - B·X`, the self-expression residual.
pub fn self_expression_residual(
    latent: &Matrix,
    b: &CoefficientMatrix,
) -> Result<f64, SelfExpressError> {
    if b.n() != latent.rows() {
        return Err(SelfExpressError::Linalg(LinalgError::DimensionMismatch {
            context: "self-expression residual",
            expected: (latent.rows(), latent.rows()),
            got: (b.n(), b.n()),
        }));
    }
    let recon = b.values().matmul(latent)?;
    Ok(latent.sub(&recon)?.frobenius_norm_sq())
}
