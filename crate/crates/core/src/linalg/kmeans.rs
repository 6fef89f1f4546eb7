// Index-based loops below keep point/label/center arrays visibly in step.
#![allow(clippy::needless_range_loop)]

//! Seeded k-means with k-means++ initialization and restarts.

use super::rng::SplitMix64;
use super::{LinalgError, Matrix};

/// Default restart count used by callers that do not override it.
pub const DEFAULT_RESTARTS: usize = 20;

const MAX_LLOYD_ITER: usize = 300;

/// Clusters the rows of `points` into `k` groups.
///
/// Runs `restarts` independent k-means++ initializations and returns the
/// labeling with the lowest within-cluster sum of squares. Fully
/// deterministic for a fixed `(seed, restarts)` pair.
pub fn kmeans(
    points: &Matrix,
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<Vec<usize>, LinalgError> {
    let n = points.rows();
    if n == 0 {
        return Err(LinalgError::EmptyInput);
    }
    if k == 0 || k > n {
        return Err(LinalgError::KTooLarge { k, n });
    }
    let restarts = restarts.max(1);

    let base = SplitMix64::new(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts {
        let mut rng = base.fork(r as u64);
        let (labels, inertia) = lloyd(points, k, &mut rng);
        let better = match &best {
            None => true,
            Some((best_inertia, _)) => inertia < *best_inertia,
        };
        if better {
            best = Some((inertia, labels));
        }
    }
    Ok(best.expect("restarts >= 1").1)
}

/// One k-means++ initialization followed by Lloyd iterations to a fixed
/// point. Returns labels and final inertia.
fn lloyd(points: &Matrix, k: usize, rng: &mut SplitMix64) -> (Vec<usize>, f64) {
    let (labels, inertia, _history) = lloyd_traced(points, k, rng);
    (labels, inertia)
}

/// As [`lloyd`], additionally reporting the inertia after every assignment
/// step so tests can check monotone descent.
fn lloyd_traced(points: &Matrix, k: usize, rng: &mut SplitMix64) -> (Vec<usize>, f64, Vec<f64>) {
    let n = points.rows();
    let dim = points.cols();
    let mut centers = kmeanspp_centers(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut history = Vec::new();
    let mut inertia = f64::INFINITY;

    for _ in 0..MAX_LLOYD_ITER {
        // assignment
        let mut changed = false;
        let mut total = 0.0;
        for i in 0..n {
            let row = points.row(i);
            let mut best_c = 0;
            let mut best_d = dist_sq(row, centers.row(0));
            for c in 1..k {
                let d = dist_sq(row, centers.row(c));
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            if labels[i] != best_c {
                labels[i] = best_c;
                changed = true;
            }
            total += best_d;
        }
        history.push(total);
        let converged = !changed && total >= inertia;
        inertia = total;
        if converged {
            break;
        }

        // update
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = labels[i];
            counts[c] += 1;
            let row = points.row(i);
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // relocate an empty cluster to the point farthest from its center
                let far = farthest_point(points, &centers, &labels);
                centers.row_mut(c).copy_from_slice(points.row(far));
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            for (dst, s) in centers.row_mut(c).iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                *dst = s * inv;
            }
        }
    }
    (labels, inertia, history)
}

fn kmeanspp_centers(points: &Matrix, k: usize, rng: &mut SplitMix64) -> Matrix {
    let n = points.rows();
    let dim = points.cols();
    let mut centers = Matrix::zeros(k, dim);
    let first = rng.next_below(n as u64) as usize;
    centers.row_mut(0).copy_from_slice(points.row(first));

    let mut min_d: Vec<f64> = (0..n)
        .map(|i| dist_sq(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = min_d.iter().sum();
        let next = if total <= 0.0 {
            // all points coincide with chosen centers
            rng.next_below(n as u64) as usize
        } else {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in min_d.iter().enumerate() {
                acc += d;
                if acc >= target {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centers.row_mut(c).copy_from_slice(points.row(next));
        for i in 0..n {
            let d = dist_sq(points.row(i), centers.row(c));
            if d < min_d[i] {
                min_d[i] = d;
            }
        }
    }
    centers
}

fn farthest_point(points: &Matrix, centers: &Matrix, labels: &[usize]) -> usize {
    let mut best = 0;
    let mut best_d = -1.0;
    for i in 0..points.rows() {
        let d = dist_sq(points.row(i), centers.row(labels[i]));
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_separated_pairs() {
        let pts = Matrix::from_rows(&[&[0.0], &[0.1], &[10.0], &[10.1]]);
        let labels = kmeans(&pts, 2, 1, 5).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let pts = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let labels = kmeans(&pts, 3, 3, 5).unwrap();
        let mut seen = [false; 3];
        for &l in &labels {
            assert!(!seen[l], "duplicate label with k = n");
            seen[l] = true;
        }
        // inertia must be zero: each point is its own center
        let mut rng = SplitMix64::new(0);
        let (_, inertia) = lloyd(&pts, 3, &mut rng);
        assert_eq!(inertia, 0.0);
    }

    #[test]
    fn three_blobs_recovered() {
        let mut rng = SplitMix64::new(99);
        let mut rows = Vec::new();
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        for c in &centers {
            for _ in 0..20 {
                rows.push([
                    c[0] + 0.01 * rng.next_gaussian(),
                    c[1] + 0.01 * rng.next_gaussian(),
                ]);
            }
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let pts = Matrix::from_rows(&refs);
        let labels = kmeans(&pts, 3, 7, 10).unwrap();
        for blob in 0..3 {
            let first = labels[blob * 20];
            for i in 0..20 {
                assert_eq!(labels[blob * 20 + i], first, "blob {blob} split");
            }
        }
        assert_ne!(labels[0], labels[20]);
        assert_ne!(labels[20], labels[40]);
        assert_ne!(labels[0], labels[40]);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = SplitMix64::new(4);
        let pts = Matrix::from_parts(30, 3, (0..90).map(|_| rng.next_gaussian()).collect());
        let a = kmeans(&pts, 4, 11, 20).unwrap();
        let b = kmeans(&pts, 4, 11, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inertia_non_increasing_within_run() {
        let mut rng = SplitMix64::new(8);
        let pts = Matrix::from_parts(50, 2, (0..100).map(|_| rng.next_gaussian()).collect());
        for stream in 0..5 {
            let mut r = SplitMix64::new(100).fork(stream);
            let (_, _, history) = lloyd_traced(&pts, 3, &mut r);
            for w in history.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "inertia increased: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn rejects_bad_k() {
        let pts = Matrix::from_rows(&[&[0.0], &[1.0]]);
        assert!(matches!(
            kmeans(&pts, 3, 0, 1),
            Err(LinalgError::KTooLarge { .. })
        ));
    }
}
