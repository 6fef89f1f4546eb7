//! Synthetic union-of-subspaces data with known ground-truth labels.

use crate::linalg::rng::SplitMix64;
use crate::linalg::Matrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
}

/// Recipe for a union of `k` linear subspaces in `ambient_dim` dimensions.
///
/// Default mode draws mutually orthogonal subspaces (each basis built in the
/// orthogonal complement of all earlier ones), which makes block-structure
/// claims hold with clean tolerances. Clearing `orthogonal` draws each basis
/// independently instead: the subspaces are then independent with
/// probability one but generally not orthogonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub k: usize,
    pub subspace_dim: usize,
    pub points_per_subspace: usize,
    pub ambient_dim: usize,
    pub noise_sigma: f64,
    pub orthogonal: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.k == 0 || self.subspace_dim == 0 || self.points_per_subspace == 0 {
            return Err(SynthError::InfeasibleSpec(
                "k, subspace_dim, and points_per_subspace must all be positive".into(),
            ));
        }
        if self.subspace_dim >= self.ambient_dim {
            return Err(SynthError::InfeasibleSpec(format!(
                "subspace_dim {} must be below ambient_dim {}",
                self.subspace_dim, self.ambient_dim
            )));
        }
        if self.k * self.subspace_dim > self.ambient_dim {
            return Err(SynthError::InfeasibleSpec(format!(
                "k*subspace_dim = {} exceeds ambient_dim {}; independence is unachievable",
                self.k * self.subspace_dim,
                self.ambient_dim
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(SynthError::InfeasibleSpec(format!(
                "noise_sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Draws the data matrix (one sample per row, grouped by subspace) and
    /// its label vector. Deterministic per seed.
    pub fn generate(&self) -> Result<(Matrix, Vec<usize>), SynthError> {
        self.validate()?;
        let mut rng = SplitMix64::new(self.seed);
        let d = self.ambient_dim;

        let mut bases: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.k);
        let mut all_vectors: Vec<Vec<f64>> = Vec::new();
        for _ in 0..self.k {
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(self.subspace_dim);
            for _ in 0..self.subspace_dim {
                let against: Vec<&[f64]> = if self.orthogonal {
                    all_vectors.iter().map(Vec::as_slice).collect()
                } else {
                    basis.iter().map(Vec::as_slice).collect()
                };
                let v = draw_unit_orthogonal(&mut rng, d, &against);
                if self.orthogonal {
                    all_vectors.push(v.clone());
                }
                basis.push(v);
            }
            bases.push(basis);
        }

        let n = self.k * self.points_per_subspace;
        let mut data = vec![0.0; n * d];
        let mut labels = Vec::with_capacity(n);
        for (class, basis) in bases.iter().enumerate() {
            for p in 0..self.points_per_subspace {
                let row = class * self.points_per_subspace + p;
                let coef = draw_unit_vector(&mut rng, self.subspace_dim);
                let out = &mut data[row * d..(row + 1) * d];
                for (c, b) in coef.iter().zip(basis) {
                    for (slot, bv) in out.iter_mut().zip(b) {
                        *slot += c * bv;
                    }
                }
                if self.noise_sigma > 0.0 {
                    for slot in out.iter_mut() {
                        *slot += self.noise_sigma * rng.next_gaussian();
                    }
                }
                labels.push(class);
            }
        }
        Ok((Matrix::from_parts(n, d, data), labels))
    }
}

fn draw_unit_vector(rng: &mut SplitMix64, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draws a Gaussian vector, removes its components along the given unit
/// vectors (two passes for numerical hygiene), and normalizes. Redraws on a
/// degenerate remainder.
fn draw_unit_orthogonal(rng: &mut SplitMix64, dim: usize, against: &[&[f64]]) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
        for _ in 0..2 {
            for b in against {
                let dot: f64 = v.iter().zip(*b).map(|(a, c)| a * c).sum();
                for (slot, c) in v.iter_mut().zip(*b) {
                    *slot -= dot * c;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eig;
    use crate::selfexpress::{self_expression_residual, solve_self_expression};

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            k: 3,
            subspace_dim: 3,
            points_per_subspace: 12,
            ambient_dim: 12,
            noise_sigma: 0.0,
            orthogonal: true,
            seed: 17,
        }
    }

    #[test]
    fn labels_cover_each_class_exactly() {
        let (data, labels) = spec().generate().unwrap();
        assert_eq!(data.rows(), 36);
        assert_eq!(data.cols(), 12);
        assert_eq!(labels.len(), 36);
        for class in 0..3 {
            assert_eq!(labels.iter().filter(|&&l| l == class).count(), 12);
        }
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let (a, la) = spec().generate().unwrap();
        let (b, lb) = spec().generate().unwrap();
        assert_eq!(la, lb);
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn noiseless_points_have_unit_norm() {
        for orthogonal in [true, false] {
            let (data, _) = SyntheticSpec {
                orthogonal,
                ..spec()
            }
            .generate()
            .unwrap();
            for i in 0..data.rows() {
                let norm: f64 = data.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() <= 1e-12, "row {i}: norm {norm}");
            }
        }
    }

    #[test]
    fn noise_perturbs_points_off_the_sphere() {
        let (data, _) = SyntheticSpec {
            noise_sigma: 0.1,
            ..spec()
        }
        .generate()
        .unwrap();
        let off_sphere = (0..data.rows()).any(|i| {
            let norm: f64 = data.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm - 1.0).abs() > 1e-6
        });
        assert!(off_sphere);
    }

    #[test]
    fn orthogonal_mode_gives_orthogonal_cross_class_points() {
        let (data, labels) = spec().generate().unwrap();
        for i in 0..data.rows() {
            for j in 0..data.rows() {
                if labels[i] != labels[j] {
                    let dot: f64 = data.row(i).iter().zip(data.row(j)).map(|(a, b)| a * b).sum();
                    assert!(dot.abs() <= 1e-10, "rows {i},{j}: dot {dot}");
                }
            }
        }
    }

    #[test]
    fn single_subspace_data_has_bounded_rank() {
        let (data, _) = SyntheticSpec {
            k: 1,
            subspace_dim: 3,
            points_per_subspace: 20,
            ambient_dim: 8,
            noise_sigma: 0.0,
            orthogonal: true,
            seed: 3,
        }
        .generate()
        .unwrap();
        // eigenvalues of XᵀX beyond the intrinsic dimension must vanish
        let gram = data.transpose().gram();
        let eig = symmetric_eig(&gram).unwrap();
        let top = eig.eigenvalues.last().unwrap();
        for &value in &eig.eigenvalues[..8 - 3] {
            assert!(value.abs() <= 1e-10 * top.max(1.0), "eigenvalue {value}");
        }
    }

    #[test]
    fn noiseless_data_is_self_expressive_at_tiny_lambda() {
        let (data, _) = spec().generate().unwrap();
        let b = solve_self_expression(&data, 1e-6).unwrap();
        let residual = self_expression_residual(&data, &b).unwrap();
        let scale = data.frobenius_norm_sq();
        assert!(residual <= 1e-8 * scale, "residual {residual}, scale {scale}");
    }

    #[test]
    fn between_class_coefficient_mass_vanishes_for_independent_subspaces() {
        for orthogonal in [true, false] {
            let (data, labels) = SyntheticSpec {
                orthogonal,
                ..spec()
            }
            .generate()
            .unwrap();
            let b = solve_self_expression(&data, 1e-6).unwrap();
            let mut within = 0.0;
            let mut between = 0.0;
            for i in 0..data.rows() {
                for j in 0..data.rows() {
                    let mass = b.values().get(i, j).abs();
                    if labels[i] == labels[j] {
                        within += mass;
                    } else {
                        between += mass;
                    }
                }
            }
            assert!(
                between <= 1e-6 * (within + between),
                "orthogonal={orthogonal}: between {between}, within {within}"
            );
        }
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let base = spec();
        let cases = [
            SyntheticSpec {
                subspace_dim: 12,
                ..base
            },
            SyntheticSpec {
                k: 5,
                subspace_dim: 3,
                ..base
            },
            SyntheticSpec { k: 0, ..base },
            SyntheticSpec {
                points_per_subspace: 0,
                ..base
            },
            SyntheticSpec {
                noise_sigma: -0.1,
                ..base
            },
            SyntheticSpec {
                noise_sigma: f64::NAN,
                ..base
            },
        ];
        for (i, case) in cases.iter().enumerate() {
            assert!(
                matches!(case.generate(), Err(SynthError::InfeasibleSpec(_))),
                "case {i} should be infeasible"
            );
        }
    }

    #[test]
    fn seeds_give_different_draws() {
        let (a, _) = spec().generate().unwrap();
        let (b, _) = SyntheticSpec { seed: 18, ..spec() }.generate().unwrap();
        assert!(a.sub(&b).unwrap().max_abs() > 1e-3);
    }
}
