//! Laplacian structural decomposition: spectral clustering of a
//! stripe-emphasizing affinity, with boundaries at cluster-label changes.

mod affinity;
mod kmeans;
mod laplacian;

pub use affinity::{build_affinity, default_knn, recurrence_matrix};
pub use kmeans::{kmeans, KMeansConfig, KMeansFit};
pub use laplacian::{laplacian_embedding, normalized_laplacian, symmetric_eigen};

use crate::error::{invalid, Result};
use crate::stats::centered_window;
use crate::types::{BarMatrix, Segmentation};

pub const DEFAULT_MU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsdParams {
    /// Number of clusters.
    pub k: usize,
    /// Recurrence neighbours; `None` uses [`default_knn`].
    pub knn: Option<usize>,
    /// Weight of the recurrence term against the local path term.
    pub mu: f64,
    /// Label smoothing window; `None` uses `k`.
    pub median_size: Option<usize>,
    pub seed: u64,
}

impl LsdParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            knn: None,
            mu: DEFAULT_MU,
            median_size: None,
            seed: 0,
        }
    }
}

/// Majority vote over a centered window (shrunk at the edges). On a tie
/// the bar keeps its own label if it is among the winners, otherwise the
/// smallest winning label is taken.
pub fn mode_filter(labels: &[usize], size: usize) -> Vec<usize> {
    let n_labels = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; n_labels];
    (0..labels.len())
        .map(|t| {
            let (lo, hi) = centered_window(t, size, labels.len());
            counts.iter_mut().for_each(|c| *c = 0);
            for &l in &labels[lo..=hi] {
                counts[l] += 1;
            }
            let best = counts.iter().copied().max().unwrap_or(0);
            if counts[labels[t]] == best {
                labels[t]
            } else {
                counts.iter().position(|&c| c == best).expect("max exists")
            }
        })
        .collect()
}

/// Boundaries at every change of label, plus `0` and `B`.
pub fn change_points(labels: &[usize]) -> Segmentation {
    let changes = (1..labels.len()).filter(|&t| labels[t] != labels[t - 1]);
    Segmentation::from_candidates(changes, labels.len())
}

/// Number of distinct rows, counting no further than `limit`.
fn distinct_rows(x: &BarMatrix, limit: usize) -> usize {
    let v = x.values();
    let mut seen: Vec<usize> = Vec::new();
    for i in 0..v.nrows() {
        if !seen.iter().any(|&j| v.row(j) == v.row(i)) {
            seen.push(i);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

/// Affinity → normalized-Laplacian embedding → k-means → smoothed labels →
/// change points. Tracks with fewer than `max(k, 3)` bars come back as the
/// single segment `[0, B]`.
pub fn segment_lsd(x: &BarMatrix, params: &LsdParams) -> Result<Segmentation> {
    let n = x.n_bars();
    if params.k == 0 {
        return invalid("LSD needs at least one cluster");
    }
    if n < params.k || n < 3 {
        log::warn!("LSD: {n} bars cannot hold {} clusters; returning one segment", params.k);
        return Ok(Segmentation::whole(n));
    }
    // There cannot be more clusters than distinct feature vectors.
    let k = params.k.min(distinct_rows(x, params.k));
    if k == 1 {
        return Ok(Segmentation::whole(n));
    }
    let knn = params.knn.unwrap_or_else(|| default_knn(n));
    let affinity = build_affinity(x, knn, params.mu)?;
    let embedding = laplacian_embedding(affinity.values(), k)?;
    let config = KMeansConfig {
        seed: params.seed,
        ..KMeansConfig::new(k)
    };
    let fit = kmeans(embedding.view(), &config);
    let smoothed = mode_filter(&fit.labels, params.median_size.unwrap_or(params.k));
    Ok(change_points(&smoothed))
}
