use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::ssm::squared_distances;
use crate::stats::median;
use crate::types::{BarMatrix, SelfSimilarityMatrix, SimilarityKind};

/// Default neighbour count for the recurrence graph: `ceil(1 + 2·log2(B))`,
/// kept within `[1, B - 1]`.
pub fn default_knn(n_bars: usize) -> usize {
    let k = (1.0 + 2.0 * (n_bars.max(1) as f64).log2()).ceil() as usize;
    k.clamp(1, n_bars.saturating_sub(1).max(1))
}

/// `exp(-d² / 2σ²)`, taking the σ → 0 limit when the bandwidth vanishes.
fn gaussian(sq_dist: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        (-sq_dist / (2.0 * sigma * sigma)).exp()
    } else if sq_dist == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// The `knn` nearest other rows of each row, ties broken by index.
fn nearest_neighbours(sq: &Array2<f64>, knn: usize) -> Vec<Vec<usize>> {
    let n = sq.nrows();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| sq[[i, a]].total_cmp(&sq[[i, b]]).then(a.cmp(&b)));
            others.truncate(knn);
            others.sort_unstable();
            others
        })
        .collect()
}

/// Mutual k-nearest-neighbour recurrence matrix (0/1, zero diagonal).
pub fn recurrence_matrix(x: &BarMatrix, knn: usize) -> Array2<f64> {
    let sq = squared_distances(x.values());
    mutual_knn(&sq, knn)
}

fn mutual_knn(sq: &Array2<f64>, knn: usize) -> Array2<f64> {
    let n = sq.nrows();
    let neighbours = nearest_neighbours(sq, knn);
    let mut r = Array2::zeros((n, n));
    for i in 0..n {
        for &j in &neighbours[i] {
            if neighbours[j].binary_search(&i).is_ok() {
                r[[i, j]] = 1.0;
            }
        }
    }
    r
}

/// Stripe-emphasizing affinity: `mu · R_w + (1 - mu) · Δ`.
///
/// `R_w` keeps mutual k-NN links weighted by a Gaussian whose bandwidth is
/// the median linked distance; `Δ` links consecutive bars with a Gaussian of
/// the median consecutive distance.
pub fn build_affinity(x: &BarMatrix, knn: usize, mu: f64) -> Result<SelfSimilarityMatrix> {
    let n = x.n_bars();
    if n < 3 {
        return invalid(format!("LSD affinity needs at least 3 bars, got {n}"));
    }
    if knn == 0 || knn >= n {
        return invalid(format!("knn must lie in [1, {}), got {knn}", n));
    }
    if !(0.0..=1.0).contains(&mu) {
        return invalid(format!("mu must lie in [0, 1], got {mu}"));
    }

    let sq = squared_distances(x.values());
    let links = mutual_knn(&sq, knn);
    let linked: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| links[[i, j]] > 0.0)
        .map(|(i, j)| sq[[i, j]].sqrt())
        .collect();
    let sigma_rec = median(&linked).unwrap_or(0.0);
    let adjacent: Vec<f64> = (0..n - 1).map(|i| sq[[i, i + 1]].sqrt()).collect();
    let sigma_loc = median(&adjacent).unwrap_or(0.0);

    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut w = 0.0;
            if links[[i, j]] > 0.0 {
                w += mu * gaussian(sq[[i, j]], sigma_rec);
            }
            if j == i + 1 {
                w += (1.0 - mu) * gaussian(sq[[i, j]], sigma_loc);
            }
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
    }
    SelfSimilarityMatrix::new(a, SimilarityKind::LsdAffinity)
}
