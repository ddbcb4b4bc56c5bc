//! Barwise self-similarity matrices.

use ndarray::{Array2, Axis};

use crate::error::{invalid, Result};
use crate::stats::median;
use crate::types::{BarMatrix, SelfSimilarityMatrix, SimilarityKind};

fn row_norms(x: &Array2<f64>) -> Vec<f64> {
    x.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

/// Indices of rows with zero Euclidean norm.
pub fn zero_norm_rows(x: &BarMatrix) -> Vec<usize> {
    row_norms(x.values())
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Cosine similarity between bars. Zero-norm rows get similarity 0 to every
/// other bar; the diagonal is exactly 1.
pub fn cosine_ssm(x: &BarMatrix) -> SelfSimilarityMatrix {
    let v = x.values();
    let n = v.nrows();
    let norms = row_norms(v);
    let zero = norms.iter().filter(|&&n| n == 0.0).count();
    if zero > 0 {
        log::warn!("cosine SSM: {zero} zero-norm bar(s) get zero similarity");
    }
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        s[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let c = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                (v.row(i).dot(&v.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            s[[i, j]] = c;
            s[[j, i]] = c;
        }
    }
    SelfSimilarityMatrix::new(s, SimilarityKind::Cosine).expect("symmetric by construction")
}

/// Squared Euclidean distances between all rows.
pub(crate) fn squared_distances(v: &Array2<f64>) -> Array2<f64> {
    let n = v.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &v.row(i) - &v.row(j);
            let sq = diff.dot(&diff);
            d[[i, j]] = sq;
            d[[j, i]] = sq;
        }
    }
    d
}

/// Median of the pairwise Euclidean distances over `i < j`.
pub fn median_pairwise_distance(x: &BarMatrix) -> Option<f64> {
    let d = squared_distances(x.values());
    let n = d.nrows();
    let upper: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| d[[i, j]].sqrt())
        .collect();
    median(&upper)
}

/// Gaussian-kernel similarity `exp(-|xi - xj|² / 2σ²)`.
///
/// `sigma = None` picks the median pairwise distance. A zero bandwidth
/// yields the all-ones matrix.
pub fn rbf_ssm(x: &BarMatrix, sigma: Option<f64>) -> Result<SelfSimilarityMatrix> {
    let n = x.n_bars();
    if n < 2 {
        return invalid(format!("RBF SSM needs at least 2 bars, got {n}"));
    }
    let sigma = match sigma {
        Some(s) if s.is_finite() && s >= 0.0 => s,
        Some(s) => return invalid(format!("RBF bandwidth must be finite and >= 0, got {s}")),
        None => median_pairwise_distance(x).expect("n >= 2"),
    };
    if sigma == 0.0 {
        return SelfSimilarityMatrix::new(Array2::ones((n, n)), SimilarityKind::Rbf);
    }
    let d = squared_distances(x.values());
    let denom = 2.0 * sigma * sigma;
    let mut s = d.mapv(|sq| (-sq / denom).exp());
    s.diag_mut().fill(1.0);
    SelfSimilarityMatrix::new(s, SimilarityKind::Rbf)
}

/// Scales every nonzero row to unit Euclidean norm.
pub fn normalize_rows(x: &BarMatrix) -> BarMatrix {
    let mut v = x.values().clone();
    for mut row in v.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    BarMatrix::new(v, x.feature_id()).expect("scaling keeps entries finite")
}
