//! Affinity construction and normalized spectral clustering.
//!
//! The coefficient matrix is turned into a symmetric non-negative affinity
//! by optional per-row magnitude thresholding followed by
//! `A = (|B̃| + |B̃ᵀ|)/2`, then clustered with the symmetric normalized
//! Laplacian: embed each sample by the eigenvectors of the `k` smallest
//! eigenvalues, normalize the embedding rows to unit length, and run
//! k-means on the rows.

use crate::linalg::{kmeans, symmetric_eig, LinalgError, Matrix, DEFAULT_RESTARTS};
use crate::selfexpress::CoefficientMatrix;
use thiserror::Error;

/// Degree floor used when the affinity graph has isolated vertices.
const DEGREE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("coefficient row {0} is entirely zero; the latent code collapsed")]
    AllZeroRow(usize),
    #[error("invalid affinity matrix: {0}")]
    InvalidAffinity(String),
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Symmetric, non-negative, zero-diagonal affinity over `n` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    values: Matrix,
}

impl AffinityMatrix {
    /// Validates the invariants exactly: bitwise symmetry, no negative
    /// entries, zero diagonal.
    pub fn new(values: Matrix) -> Result<Self, SpectralError> {
        let n = values.rows();
        if values.cols() != n {
            return Err(SpectralError::InvalidAffinity(format!(
                "expected square matrix, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        for i in 0..n {
            if values.get(i, i) != 0.0 {
                return Err(SpectralError::InvalidAffinity(format!(
                    "diagonal entry ({i},{i}) = {} is not zero",
                    values.get(i, i)
                )));
            }
            for j in 0..n {
                let v = values.get(i, j);
                if v.is_nan() || v < 0.0 {
                    return Err(SpectralError::InvalidAffinity(format!(
                        "entry ({i},{j}) = {v} is negative or NaN"
                    )));
                }
                if v.to_bits() != values.get(j, i).to_bits() {
                    return Err(SpectralError::InvalidAffinity(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClusterConfig {
    /// Number of clusters; must satisfy `2 ≤ k ≤ n`.
    pub k: usize,
    /// Per-row cumulative-magnitude threshold in (0,1]; 1 keeps every entry.
    pub threshold_ratio: f64,
    pub seed: u64,
    pub kmeans_restarts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 2,
            threshold_ratio: 1.0,
            seed: 0,
            kmeans_restarts: DEFAULT_RESTARTS,
        }
    }
}

impl ClusterConfig {
    fn validate(&self, n: usize) -> Result<(), SpectralError> {
        if self.k < 2 || self.k > n {
            return Err(SpectralError::InvalidConfig(format!(
                "k = {} must lie in [2, {n}]",
                self.k
            )));
        }
        if !(self.threshold_ratio > 0.0 && self.threshold_ratio <= 1.0) {
            return Err(SpectralError::InvalidConfig(format!(
                "threshold_ratio = {} must lie in (0, 1]",
                self.threshold_ratio
            )));
        }
        if self.kmeans_restarts == 0 {
            return Err(SpectralError::InvalidConfig(
                "kmeans_restarts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Thresholds each row to the smallest set of largest-magnitude entries
/// whose cumulative magnitude reaches `threshold_ratio` of the row total,
/// then symmetrizes: `A = (|B̃| + |B̃ᵀ|)/2`. A ratio of 1 skips the
/// thresholding pass entirely so no entry is lost to rounding.
pub fn build_affinity(
    b: &CoefficientMatrix,
    threshold_ratio: f64,
) -> Result<AffinityMatrix, SpectralError> {
    if !(threshold_ratio > 0.0 && threshold_ratio <= 1.0) {
        return Err(SpectralError::InvalidConfig(format!(
            "threshold_ratio = {threshold_ratio} must lie in (0, 1]"
        )));
    }
    let n = b.n();
    let mut kept = Matrix::zeros(n, n);
    for i in 0..n {
        let row = b.values().row(i);
        let total: f64 = row.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            return Err(SpectralError::AllZeroRow(i));
        }
        if threshold_ratio >= 1.0 {
            kept.row_mut(i).copy_from_slice(row);
            continue;
        }
        // largest magnitudes first; ties broken by column for determinism
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &c| {
            row[c]
                .abs()
                .partial_cmp(&row[a].abs())
                .expect("coefficient magnitudes are finite")
                .then(a.cmp(&c))
        });
        let target = threshold_ratio * total;
        let mut cumulative = 0.0;
        for &j in &order {
            if cumulative >= target {
                break;
            }
            cumulative += row[j].abs();
            kept.row_mut(i)[j] = row[j];
        }
    }
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = (kept.get(i, j).abs() + kept.get(j, i).abs()) / 2.0;
            values.row_mut(i)[j] = v;
            values.row_mut(j)[i] = v;
        }
    }
    AffinityMatrix::new(values)
}

/// Normalized spectral clustering of an affinity matrix into `config.k`
/// groups. Labels lie in `[0, k)`.
pub fn spectral_cluster(
    affinity: &AffinityMatrix,
    config: &ClusterConfig,
) -> Result<Vec<usize>, SpectralError> {
    let n = affinity.n();
    config.validate(n)?;
    let a = affinity.values();

    let mut degrees: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    if degrees.iter().any(|&d| d <= 0.0) {
        log::warn!(
            "affinity graph has isolated vertices; flooring all degrees at {DEGREE_EPSILON}"
        );
        for d in &mut degrees {
            *d += DEGREE_EPSILON;
        }
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();

    // L_sym = I − D^{−1/2} A D^{−1/2}, symmetric by symmetry of A
    let mut laplacian = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let off = -inv_sqrt[i] * a.get(i, j) * inv_sqrt[j];
            laplacian.row_mut(i)[j] = if i == j { 1.0 + off } else { off };
        }
    }
    // exact symmetry for the eigensolver despite rounding
    for i in 0..n {
        for j in 0..i {
            let v = laplacian.get(i, j);
            laplacian.row_mut(j)[i] = v;
        }
    }

    let eig = symmetric_eig(&laplacian)?;
    // eigenvalues ascend, so the embedding is the first k columns
    let mut embedding = Matrix::zeros(n, config.k);
    for i in 0..n {
        for c in 0..config.k {
            embedding.row_mut(i)[c] = eig.eigenvectors.get(i, c);
        }
    }
    for i in 0..n {
        let norm: f64 = embedding.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in embedding.row_mut(i) {
                *v /= norm;
            }
        }
    }

    let labels = kmeans(&embedding, config.k, config.seed, config.kmeans_restarts)?;
    let mut counts = vec![0usize; config.k];
    for &l in &labels {
        counts[l] += 1;
    }
    if counts.contains(&0) {
        log::warn!("spectral clustering produced empty clusters: counts {counts:?}");
    }
    Ok(labels)
}

/// [`build_affinity`] followed by [`spectral_cluster`].
pub fn cluster_from_coefficients(
    b: &CoefficientMatrix,
    config: &ClusterConfig,
) -> Result<Vec<usize>, SpectralError> {
    let affinity = build_affinity(b, config.threshold_ratio)?;
    spectral_cluster(&affinity, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaldata::{clustering_error, SyntheticSpec};
    use crate::linalg::rng::SplitMix64;
    use crate::selfexpress::solve_self_expression;

    fn coefficient(values: Matrix) -> CoefficientMatrix {
        CoefficientMatrix::new(values).unwrap()
    }

    /// Block-diagonal coefficient matrix: `k` blocks of `per` samples, every
    /// within-block off-diagonal entry equal to `weight`.
    fn block_coefficients(k: usize, per: usize, weight: f64) -> CoefficientMatrix {
        let n = k * per;
        let mut m = Matrix::zeros(n, n);
        for block in 0..k {
            for i in 0..per {
                for j in 0..per {
                    if i != j {
                        let r = block * per + i;
                        let c = block * per + j;
                        m.row_mut(r)[c] = weight;
                    }
                }
            }
        }
        coefficient(m)
    }

    fn block_labels(k: usize, per: usize) -> Vec<usize> {
        (0..k * per).map(|i| i / per).collect()
    }

    #[test]
    fn full_ratio_preserves_symmetric_nonnegative_coefficients() {
        let mut m = Matrix::zeros(3, 3);
        m.row_mut(0)[1] = 0.5;
        m.row_mut(1)[0] = 0.5;
        m.row_mut(1)[2] = 0.25;
        m.row_mut(2)[1] = 0.25;
        m.row_mut(0)[2] = 0.1;
        m.row_mut(2)[0] = 0.1;
        let b = coefficient(m.clone());
        let a = build_affinity(&b, 1.0).unwrap();
        assert_eq!(a.values(), &m);
    }

    #[test]
    fn symmetrization_takes_magnitudes() {
        let mut m = Matrix::zeros(2, 2);
        m.row_mut(0)[1] = 1.0;
        m.row_mut(1)[0] = -1.0;
        let a = build_affinity(&coefficient(m), 1.0).unwrap();
        assert_eq!(a.values().get(0, 1), 1.0);
        assert_eq!(a.values().get(1, 0), 1.0);
        assert_eq!(a.values().get(0, 0), 0.0);
        assert_eq!(a.values().get(1, 1), 0.0);
    }

    #[test]
    fn thresholding_keeps_the_dominant_entry() {
        // circulant rows (0, 0.9, 0.05, 0.05): at ρ=0.9 only the 0.9 entry
        // reaches the cumulative target
        let n = 4;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.row_mut(i)[(i + 1) % n] = 0.9;
            m.row_mut(i)[(i + 2) % n] = 0.05;
            m.row_mut(i)[(i + 3) % n] = 0.05;
        }
        let a = build_affinity(&coefficient(m), 0.9).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expected = if j == (i + 1) % n || i == (j + 1) % n {
                    0.45
                } else {
                    0.0
                };
                assert_eq!(a.values().get(i, j), expected, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn zero_row_is_reported() {
        let mut m = Matrix::zeros(3, 3);
        m.row_mut(0)[1] = 1.0;
        m.row_mut(1)[0] = 1.0;
        assert!(matches!(
            build_affinity(&coefficient(m), 1.0),
            Err(SpectralError::AllZeroRow(2))
        ));
    }

    #[test]
    fn affinity_invariants_are_enforced() {
        let mut asym = Matrix::zeros(2, 2);
        asym.row_mut(0)[1] = 1.0;
        assert!(matches!(
            AffinityMatrix::new(asym),
            Err(SpectralError::InvalidAffinity(_))
        ));
        let mut negative = Matrix::zeros(2, 2);
        negative.row_mut(0)[1] = -1.0;
        negative.row_mut(1)[0] = -1.0;
        assert!(matches!(
            AffinityMatrix::new(negative),
            Err(SpectralError::InvalidAffinity(_))
        ));
        let diag = Matrix::identity(2);
        assert!(matches!(
            AffinityMatrix::new(diag),
            Err(SpectralError::InvalidAffinity(_))
        ));
    }

    #[test]
    fn config_bounds_are_enforced() {
        let a = build_affinity(&block_coefficients(2, 2, 1.0), 1.0).unwrap();
        for bad in [
            ClusterConfig {
                k: 1,
                ..ClusterConfig::default()
            },
            ClusterConfig {
                k: 5,
                ..ClusterConfig::default()
            },
            ClusterConfig {
                k: 2,
                threshold_ratio: 0.0,
                ..ClusterConfig::default()
            },
            ClusterConfig {
                k: 2,
                kmeans_restarts: 0,
                ..ClusterConfig::default()
            },
        ] {
            assert!(matches!(
                spectral_cluster(&a, &bad),
                Err(SpectralError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn two_disconnected_cliques_split_exactly() {
        let a = build_affinity(&block_coefficients(2, 2, 1.0), 1.0).unwrap();
        let labels = spectral_cluster(&a, &ClusterConfig::default()).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn ideal_block_affinity_recovers_the_partition() {
        for k in [2, 3, 5] {
            let per = 8;
            let b = block_coefficients(k, per, 0.7);
            let config = ClusterConfig {
                k,
                ..ClusterConfig::default()
            };
            let labels = cluster_from_coefficients(&b, &config).unwrap();
            let err = clustering_error(&labels, &block_labels(k, per)).unwrap();
            assert_eq!(err, 0.0, "k = {k}");
        }
    }

    #[test]
    fn one_percent_off_block_noise_is_harmless() {
        let k = 3;
        let per = 20;
        let n = k * per;
        let weight = 0.5;
        let mut m = Matrix::zeros(n, n);
        let mut rng = SplitMix64::new(33);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                m.row_mut(i)[j] = if i / per == j / per {
                    weight
                } else {
                    0.01 * weight * rng.next_f64()
                };
            }
        }
        let config = ClusterConfig {
            k,
            ..ClusterConfig::default()
        };
        let labels = cluster_from_coefficients(&coefficient(m), &config).unwrap();
        let err = clustering_error(&labels, &block_labels(k, per)).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn closed_form_coefficients_cluster_noiseless_synthetic_data() {
        let (data, truth) = SyntheticSpec {
            k: 3,
            subspace_dim: 2,
            points_per_subspace: 15,
            ambient_dim: 9,
            noise_sigma: 0.0,
            orthogonal: true,
            seed: 21,
        }
        .generate()
        .unwrap();
        let b = solve_self_expression(&data, 1e-4).unwrap();
        let config = ClusterConfig {
            k: 3,
            ..ClusterConfig::default()
        };
        let labels = cluster_from_coefficients(&b, &config).unwrap();
        assert_eq!(clustering_error(&labels, &truth).unwrap(), 0.0);
    }

    #[test]
    fn clustering_is_permutation_equivariant() {
        let (data, truth) = SyntheticSpec {
            k: 3,
            subspace_dim: 2,
            points_per_subspace: 10,
            ambient_dim: 8,
            noise_sigma: 0.01,
            orthogonal: true,
            seed: 9,
        }
        .generate()
        .unwrap();
        let n = data.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = SplitMix64::new(2);
        for i in (1..n).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let permuted_rows: Vec<&[f64]> = perm.iter().map(|&i| data.row(i)).collect();
        let permuted = Matrix::from_rows(&permuted_rows);
        let permuted_truth: Vec<usize> = perm.iter().map(|&i| truth[i]).collect();

        let config = ClusterConfig {
            k: 3,
            ..ClusterConfig::default()
        };
        let labels = cluster_from_coefficients(
            &solve_self_expression(&data, 1e-3).unwrap(),
            &config,
        )
        .unwrap();
        let labels_perm = cluster_from_coefficients(
            &solve_self_expression(&permuted, 1e-3).unwrap(),
            &config,
        )
        .unwrap();
        assert_eq!(clustering_error(&labels, &truth).unwrap(), 0.0);
        assert_eq!(clustering_error(&labels_perm, &permuted_truth).unwrap(), 0.0);
        // both runs induce the same partition of the original indices
        let mut unpermuted = vec![0usize; n];
        for (pos, &orig) in perm.iter().enumerate() {
            unpermuted[orig] = labels_perm[pos];
        }
        assert_eq!(clustering_error(&unpermuted, &labels).unwrap(), 0.0);
    }

    #[test]
    fn global_scale_cancels() {
        let (data, truth) = SyntheticSpec {
            k: 2,
            subspace_dim: 2,
            points_per_subspace: 12,
            ambient_dim: 6,
            noise_sigma: 0.02,
            orthogonal: true,
            seed: 4,
        }
        .generate()
        .unwrap();
        let b = solve_self_expression(&data, 1e-3).unwrap();
        let scaled = CoefficientMatrix::new(b.values().scale(37.5)).unwrap();
        let config = ClusterConfig {
            k: 2,
            ..ClusterConfig::default()
        };
        let labels = cluster_from_coefficients(&b, &config).unwrap();
        let labels_scaled = cluster_from_coefficients(&scaled, &config).unwrap();
        assert_eq!(clustering_error(&labels_scaled, &labels).unwrap(), 0.0);
        assert_eq!(clustering_error(&labels, &truth).unwrap(), 0.0);
    }

    #[test]
    fn isolated_vertices_survive_with_a_warning() {
        // one vertex with no edges: the degree floor keeps the solve alive
        let n = 5;
        let mut m = Matrix::zeros(n, n);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    m.row_mut(i)[j] = 1.0;
                }
            }
        }
        let a = AffinityMatrix::new(m).unwrap();
        let labels = spectral_cluster(
            &a,
            &ClusterConfig {
                k: 2,
                ..ClusterConfig::default()
            },
        )
        .unwrap();
        assert_eq!(labels.len(), n);
        assert!(labels.iter().all(|&l| l < 2));
        // the isolated vertex must separate from the clique
        assert_ne!(labels[4], labels[0]);
    }

    #[test]
    fn labels_stay_in_range() {
        let b = block_coefficients(3, 5, 0.4);
        let config = ClusterConfig {
            k: 3,
            ..ClusterConfig::default()
        };
        let labels = cluster_from_coefficients(&b, &config).unwrap();
        assert_eq!(labels.len(), 15);
        assert!(labels.iter().all(|&l| l < 3));
    }
}
