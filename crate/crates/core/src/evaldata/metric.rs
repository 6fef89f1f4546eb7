//! Clustering error under the best one-to-one label matching.

use thiserror::Error;

/// Largest cluster count the exact assignment solve accepts.
pub const MAX_CLUSTERS: usize = 64;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label vectors differ in length: {predicted} vs {actual}")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("label vectors are empty")]
    EmptyLabels,
    #[error("{0} clusters exceed the assignment solver cap of {MAX_CLUSTERS}")]
    TooManyClusters(usize),
}

/// Fraction of samples misclassified under the best one-to-one mapping
/// between predicted and true cluster labels. The mapping is solved exactly
/// as a max-weight assignment over the confusion matrix, so any relabeling
/// of either argument leaves the result unchanged.
pub fn clustering_error(predicted: &[usize], actual: &[usize]) -> Result<f64, EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyLabels);
    }
    let k_pred = predicted.iter().max().unwrap() + 1;
    let k_true = actual.iter().max().unwrap() + 1;
    let k = k_pred.max(k_true);
    if k > MAX_CLUSTERS {
        return Err(EvalError::TooManyClusters(k));
    }
    let mut confusion = vec![vec![0i64; k]; k];
    for (&p, &t) in predicted.iter().zip(actual) {
        confusion[p][t] += 1;
    }
    // maximize matched count = minimize its negation
    let cost: Vec<Vec<i64>> = confusion
        .iter()
        .map(|row| row.iter().map(|&c| -c).collect())
        .collect();
    let matched = -assignment_min_cost(&cost);
    Ok(1.0 - matched as f64 / predicted.len() as f64)
}

/// Exact minimum-cost assignment on a square cost matrix (Hungarian method
/// with row/column potentials, O(k³)).
fn assignment_min_cost(cost: &[Vec<i64>]) -> i64 {
    let n = cost.len();
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    // p[j] = 1-based row matched to column j; way[j] = previous column on
    // the augmenting path
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
}

#[cfg(test)]
pub(crate) fn brute_force_error(predicted: &[usize], actual: &[usize]) -> f64 {
    // minimum misclassification over every bijective relabeling of the
    // predicted side; factorial cost, test oracle only
    let k = predicted
        .iter()
        .chain(actual)
        .max()
        .map(|&m| m + 1)
        .unwrap_or(0);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = usize::MAX;
    permute(&mut perm, 0, &mut |perm| {
        let wrong = predicted
            .iter()
            .zip(actual)
            .filter(|&(&p, &t)| perm[p] != t)
            .count();
        best = best.min(wrong);
    });
    best as f64 / predicted.len() as f64
}

#[cfg(test)]
fn permute(items: &mut Vec<usize>, at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == items.len() {
        visit(items);
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        permute(items, at + 1, visit);
        items.swap(at, i);
    }
}
