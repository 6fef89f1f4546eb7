//! Symmetric positive definite solves via Cholesky factorization.

use super::{LinalgError, Matrix};

/// Relative asymmetry tolerated by [`spd_solve`] and [`Cholesky::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factorizes a symmetric positive definite matrix.
    ///
    /// Fails with `NotPositiveDefinite` on the first non-positive pivot,
    /// which doubles as the validity check for ridge shifts: a shift too
    /// small for the numeric width surfaces here rather than as garbage
    /// output.
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        if a.rows() != a.cols() {
            return Err(LinalgError::DimensionMismatch {
                context: "cholesky: square matrix required",
                expected: (a.rows(), a.rows()),
                got: (a.rows(), a.cols()),
            });
        }
        if !a.is_symmetric_within(SYMMETRY_TOL) {
            return Err(LinalgError::NotSymmetric);
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                let v = l.get(j, k);
                diag -= v * v;
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(LinalgError::NotPositiveDefinite);
            }
            let pivot = diag.sqrt();
            l.set(j, j, pivot);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / pivot);
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `A x = b` for each column of `b`.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix, LinalgError> {
        let n = self.dim();
        if b.rows() != n {
            return Err(LinalgError::DimensionMismatch {
                context: "cholesky solve: rhs rows",
                expected: (n, b.cols()),
                got: (b.rows(), b.cols()),
            });
        }
        let m = b.cols();
        let mut x = b.clone();
        // forward: L y = b
        for i in 0..n {
            for k in 0..i {
                let lik = self.l.get(i, k);
                if lik == 0.0 {
                    continue;
                }
                for c in 0..m {
                    let yk = x.get(k, c);
                    let v = x.get(i, c) - lik * yk;
                    x.set(i, c, v);
                }
            }
            let d = self.l.get(i, i);
            for c in 0..m {
                x.set(i, c, x.get(i, c) / d);
            }
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = self.l.get(k, i);
                if lki == 0.0 {
                    continue;
                }
                for c in 0..m {
                    let v = x.get(i, c) - lki * x.get(k, c);
                    x.set(i, c, v);
                }
            }
            let d = self.l.get(i, i);
            for c in 0..m {
                x.set(i, c, x.get(i, c) / d);
            }
        }
        Ok(x)
    }

    /// `A⁻¹` computed as `L⁻ᵀ L⁻¹`, filled symmetrically so the result is
    /// bitwise symmetric.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        // columns of L⁻¹ by forward substitution against basis vectors
        let mut linv = Matrix::zeros(n, n);
        for j in 0..n {
            linv.set(j, j, 1.0 / self.l.get(j, j));
            for i in (j + 1)..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= self.l.get(i, k) * linv.get(k, j);
                }
                linv.set(i, j, s / self.l.get(i, i));
            }
        }
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                // (L⁻ᵀ L⁻¹)_ij = Σ_k L⁻¹[k][i] L⁻¹[k][j]; L⁻¹ lower → k ≥ max(i,j)
                for k in i..n {
                    s += linv.get(k, i) * linv.get(k, j);
                }
                inv.set(i, j, s);
                inv.set(j, i, s);
            }
        }
        inv
    }
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    Cholesky::new(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rng::SplitMix64;

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let mut rng = SplitMix64::new(seed);
        let g = Matrix::from_parts(n, n, (0..n * n).map(|_| rng.next_gaussian()).collect());
        let mut a = g.gram();
        a.shift_diagonal(1.0);
        a
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = Matrix::identity(3);
        let b = Matrix::from_rows(&[&[1.0, 4.0], &[2.0, 5.0], &[3.0, 6.0]]);
        let x = spd_solve(&a, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_solve() {
        let a = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]);
        let b = Matrix::from_rows(&[&[2.0], &[4.0]]);
        let x = spd_solve(&a, &b).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((x.get(1, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn residual_on_random_spd() {
        // derived oracle: check a·x = b by direct multiplication
        let a = random_spd(5, 9);
        let mut rng = SplitMix64::new(10);
        let b = Matrix::from_parts(5, 2, (0..10).map(|_| rng.next_gaussian()).collect());
        let x = spd_solve(&a, &b).unwrap();
        let r = a.matmul(&x).unwrap().sub(&b).unwrap();
        assert!(r.max_abs() <= 1e-9 * b.max_abs().max(1.0), "residual {}", r.max_abs());
    }

    #[test]
    fn rejects_indefinite() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]); // eigenvalues 3, -1
        let b = Matrix::zeros(2, 1);
        assert!(matches!(
            spd_solve(&a, &b),
            Err(LinalgError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Matrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        let b = Matrix::zeros(2, 1);
        assert!(matches!(spd_solve(&a, &b), Err(LinalgError::NotSymmetric)));
    }

    #[test]
    fn rejects_rhs_row_mismatch() {
        let a = Matrix::identity(3);
        let b = Matrix::zeros(2, 1);
        assert!(matches!(
            spd_solve(&a, &b),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inverse_multiplies_to_identity() {
        let a = random_spd(6, 21);
        let inv = Cholesky::new(&a).unwrap().inverse();
        let prod = a.matmul(&inv).unwrap();
        let residual = prod.sub(&Matrix::identity(6)).unwrap();
        assert!(residual.max_abs() < 1e-10, "residual {}", residual.max_abs());
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(inv.get(i, j).to_bits(), inv.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn recovers_known_solution_well_conditioned() {
        for seed in 0..20u64 {
            let a = random_spd(8, seed);
            let mut rng = SplitMix64::new(seed ^ 0xabcd);
            let x_true = Matrix::from_parts(8, 1, (0..8).map(|_| rng.next_gaussian()).collect());
            let b = a.matmul(&x_true).unwrap();
            let x = spd_solve(&a, &b).unwrap();
            let err = x.sub(&x_true).unwrap().max_abs();
            assert!(err <= 1e-8 * x_true.max_abs().max(1.0), "err {err}");
        }
    }
}
