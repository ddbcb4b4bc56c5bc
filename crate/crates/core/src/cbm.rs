//! Correlation Block-Matching: dynamic programming over segmentations,
//! maximizing the summed block scores of the diagonal SSM blocks.

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::types::{Segmentation, SelfSimilarityMatrix};

pub const DEFAULT_MAX_SIZE: usize = 32;
const BAND_WIDTH: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CbmKernel {
    /// Every off-diagonal entry of the block.
    Full,
    /// Off-diagonal entries within 7 bars of the diagonal.
    Band7,
}

/// How a block's kernel correlation is scaled before summation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CbmNormalization {
    /// Divide by the segment length in bars.
    #[default]
    SegmentLength,
    /// Divide by the square root of the number of kernel ones.
    SqrtKernelOnes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CbmParams {
    pub kernel: CbmKernel,
    pub max_size: usize,
    pub normalization: CbmNormalization,
}

impl CbmParams {
    pub fn new(kernel: CbmKernel) -> Self {
        Self {
            kernel,
            max_size: DEFAULT_MAX_SIZE,
            normalization: CbmNormalization::SegmentLength,
        }
    }
}

fn in_kernel(kind: CbmKernel, p: usize, q: usize) -> bool {
    let d = p.abs_diff(q);
    match kind {
        CbmKernel::Full => d >= 1,
        CbmKernel::Band7 => (1..=BAND_WIDTH).contains(&d),
    }
}

/// `n × n` 0/1 kernel with a zero diagonal.
pub fn cbm_kernel(n: usize, kind: CbmKernel) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(p, q)| if in_kernel(kind, p, q) { 1.0 } else { 0.0 })
}

fn kernel_ones(n: usize, kind: CbmKernel) -> usize {
    match kind {
        CbmKernel::Full => n * n - n,
        CbmKernel::Band7 => (1..=BAND_WIDTH.min(n.saturating_sub(1))).map(|d| 2 * (n - d)).sum(),
    }
}

fn normalizer(n: usize, kind: CbmKernel, norm: CbmNormalization) -> f64 {
    match norm {
        CbmNormalization::SegmentLength => n as f64,
        CbmNormalization::SqrtKernelOnes => (kernel_ones(n, kind) as f64).sqrt().max(1.0),
    }
}

/// Score of the block `[i, j)`: kernel correlation divided by `j - i`.
pub fn block_score(ssm: &SelfSimilarityMatrix, i: usize, j: usize, kind: CbmKernel) -> Result<f64> {
    block_score_with(ssm, i, j, kind, CbmNormalization::SegmentLength)
}

pub fn block_score_with(
    ssm: &SelfSimilarityMatrix,
    i: usize,
    j: usize,
    kind: CbmKernel,
    norm: CbmNormalization,
) -> Result<f64> {
    if i >= j || j > ssm.n_bars() {
        return invalid(format!("block [{i}, {j}) invalid for {} bars", ssm.n_bars()));
    }
    let s = ssm.values();
    let n = j - i;
    let mut total = 0.0;
    for p in 0..n {
        for q in 0..n {
            if in_kernel(kind, p, q) {
                total += s[[i + p, i + q]];
            }
        }
    }
    Ok(total / normalizer(n, kind, norm))
}

/// O(1)-per-block scoring from prefix sums.
struct BlockScorer {
    kind: CbmKernel,
    norm: CbmNormalization,
    /// `area[a][b]` = sum of `S[..a, ..b]`.
    area: Array2<f64>,
    /// `diag[d][p]` = sum over `r < p` of `S[r, r + d] + S[r + d, r]`, for
    /// d = 0 (counted once) up to the band width.
    diag: Vec<Vec<f64>>,
}

impl BlockScorer {
    fn new(ssm: &SelfSimilarityMatrix, kind: CbmKernel, norm: CbmNormalization) -> Self {
        let s = ssm.values();
        let n = s.nrows();
        let mut area = Array2::zeros((n + 1, n + 1));
        if kind == CbmKernel::Full {
            for a in 0..n {
                let mut row = 0.0;
                for b in 0..n {
                    row += s[[a, b]];
                    area[[a + 1, b + 1]] = area[[a, b + 1]] + row;
                }
            }
        }
        let max_d = match kind {
            CbmKernel::Full => 0,
            CbmKernel::Band7 => BAND_WIDTH,
        };
        let diag = (0..=max_d)
            .map(|d| {
                let mut acc = vec![0.0; n + 1];
                for r in 0..n {
                    let v = if r + d < n {
                        if d == 0 {
                            s[[r, r]]
                        } else {
                            s[[r, r + d]] + s[[r + d, r]]
                        }
                    } else {
                        0.0
                    };
                    acc[r + 1] = acc[r] + v;
                }
                acc
            })
            .collect();
        Self {
            kind,
            norm,
            area,
            diag,
        }
    }

    fn score(&self, i: usize, j: usize) -> f64 {
        let n = j - i;
        let total = match self.kind {
            CbmKernel::Full => {
                let a = &self.area;
                let block = a[[j, j]] - a[[i, j]] - a[[j, i]] + a[[i, i]];
                block - (self.diag[0][j] - self.diag[0][i])
            }
            CbmKernel::Band7 => (1..=BAND_WIDTH.min(n - 1))
                .map(|d| self.diag[d][j - d] - self.diag[d][i])
                .sum(),
        };
        total / normalizer(n, self.kind, self.norm)
    }
}

/// Optimal segmentation and its total score.
///
/// Among equal-score optima the fewest segments win, then the longest last
/// segment.
pub fn cbm_optimum(ssm: &SelfSimilarityMatrix, params: &CbmParams) -> Result<(Segmentation, f64)> {
    if params.max_size == 0 {
        return invalid("CBM max_size must be at least 1");
    }
    let n = ssm.n_bars();
    let scorer = BlockScorer::new(ssm, params.kernel, params.normalization);

    // (score, segments, predecessor) per prefix length.
    let mut best: Vec<(f64, usize, usize)> = vec![(0.0, 0, 0); n + 1];
    for j in 1..=n {
        let mut here = (f64::NEG_INFINITY, usize::MAX, 0);
        for i in j.saturating_sub(params.max_size)..j {
            let score = best[i].0 + scorer.score(i, j);
            let segments = best[i].1 + 1;
            // `i` ascends, so keeping the first of equal candidates keeps
            // the longest last segment.
            let better = score > here.0 || (score == here.0 && segments < here.1);
            if better {
                here = (score, segments, i);
            }
        }
        best[j] = here;
    }

    let mut boundaries = vec![n];
    let mut j = n;
    while j > 0 {
        j = best[j].2;
        boundaries.push(j);
    }
    boundaries.reverse();
    Ok((Segmentation::new(boundaries, n)?, best[n].0))
}

pub fn segment_cbm(ssm: &SelfSimilarityMatrix, params: &CbmParams) -> Result<Segmentation> {
    cbm_optimum(ssm, params).map(|(seg, _)| seg)
}
