//! Novelty-based boundary detection with a checkerboard kernel slid along
//! the SSM diagonal.

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::stats::{centered_window, median};
use crate::types::{Segmentation, SelfSimilarityMatrix};

pub const DEFAULT_TAPER_SIGMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FooteParams {
    /// Kernel half-width `M` in bars; the kernel is `2M × 2M`.
    pub kernel_size: usize,
    /// Window of the adaptive median threshold, in bars.
    pub median_size: usize,
    /// Gaussian taper width relative to `M`; `None` disables the taper.
    pub taper_sigma: Option<f64>,
}

impl FooteParams {
    pub fn new(kernel_size: usize, median_size: usize) -> Self {
        Self {
            kernel_size,
            median_size,
            taper_sigma: Some(DEFAULT_TAPER_SIGMA),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 {
            return invalid("Foote kernel size must be at least 1");
        }
        if self.median_size == 0 {
            return invalid("Foote median size must be at least 1");
        }
        if let Some(s) = self.taper_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return invalid(format!("taper sigma must be positive, got {s}"));
            }
        }
        Ok(())
    }
}

fn taper(half: usize, sigma: Option<f64>, p: usize, q: usize) -> f64 {
    match sigma {
        None => 1.0,
        Some(s) => {
            let m = half as f64;
            let dp = p as f64 - m + 0.5;
            let dq = q as f64 - m + 0.5;
            let width = s * m;
            (-(dp * dp + dq * dq) / (2.0 * width * width)).exp()
        }
    }
}

/// Signed `2M × 2M` checkerboard kernel with an optional radial Gaussian
/// taper: `+` on the two diagonal quadrants, `-` on the off-diagonal ones.
pub fn checkerboard_kernel(half: usize, taper_sigma: Option<f64>) -> Array2<f64> {
    let size = 2 * half;
    Array2::from_shape_fn((size, size), |(p, q)| {
        let sign = if (p < half) == (q < half) { 1.0 } else { -1.0 };
        sign * taper(half, taper_sigma, p, q)
    })
}

/// Entry `(a, b)` of the SSM extended past its borders by replicating the
/// first and last bars. Distinct virtual bars that collapse onto the same
/// border bar take that bar's similarity to its neighbour, not the diagonal
/// value, so padding does not look more self-similar than the border block.
pub fn padded_entry(s: &Array2<f64>, a: isize, b: isize) -> f64 {
    let last = s.nrows() as isize - 1;
    let (ca, cb) = (a.clamp(0, last) as usize, b.clamp(0, last) as usize);
    if a == b || ca != cb || last == 0 {
        return s[[ca, cb]];
    }
    let neighbour = if ca == 0 { 1 } else { ca - 1 };
    s[[ca, neighbour]]
}

/// Correlation of the kernel along the diagonal of the border-padded SSM
/// (see [`padded_entry`]), clipped at zero.
///
/// The four mirror-image taps of each top-left kernel entry share the same
/// taper weight, so they are summed as `(S_aa + S_bb) - S_ab - S_ba` before
/// weighting; a constant SSM therefore gives exactly zero novelty.
pub fn novelty_curve(ssm: &SelfSimilarityMatrix, half: usize, taper_sigma: Option<f64>) -> Vec<f64> {
    let s = ssm.values();
    let n = s.nrows();
    let at = |a: isize, b: isize| padded_entry(s, a, b);
    let size = 2 * half as isize;
    let weights = Array2::from_shape_fn((half, half), |(p, q)| taper(half, taper_sigma, p, q));

    (0..n)
        .map(|t| {
            let origin = t as isize - half as isize;
            let mut acc = 0.0;
            for p in 0..half {
                let a = origin + p as isize;
                let a_mirror = origin + size - 1 - p as isize;
                for q in 0..half {
                    let b = origin + q as isize;
                    let b_mirror = origin + size - 1 - q as isize;
                    let quad = (at(a, b) + at(a_mirror, b_mirror)) - at(a, b_mirror) - at(a_mirror, b);
                    acc += weights[[p, q]] * quad;
                }
            }
            acc.max(0.0)
        })
        .collect()
}

/// Centered running median with windows shrunk at the edges.
pub fn median_filter(values: &[f64], size: usize) -> Vec<f64> {
    (0..values.len())
        .map(|t| {
            let (lo, hi) = centered_window(t, size, values.len());
            median(&values[lo..=hi]).expect("window is never empty")
        })
        .collect()
}

/// Keeps interior local maxima (strictly above the left neighbour, at least
/// the right one) that also exceed the running median of the curve.
pub fn pick_peaks(novelty: &[f64], median_size: usize) -> Segmentation {
    let n = novelty.len();
    if n < 3 {
        return Segmentation::whole(n.max(1));
    }
    let threshold = median_filter(novelty, median_size);
    let peaks = (1..n - 1).filter(|&t| {
        novelty[t] > novelty[t - 1] && novelty[t] >= novelty[t + 1] && novelty[t] > threshold[t]
    });
    Segmentation::from_candidates(peaks, n)
}

pub fn segment_foote(ssm: &SelfSimilarityMatrix, params: &FooteParams) -> Result<Segmentation> {
    params.validate()?;
    let novelty = novelty_curve(ssm, params.kernel_size, params.taper_sigma);
    Ok(pick_peaks(&novelty, params.median_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SimilarityKind;
    use proptest::prelude::*;

    fn block_ssm(sizes: &[usize], inside: f64, outside: f64) -> SelfSimilarityMatrix {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &len)| std::iter::repeat_n(b, len))
            .collect();
        let n = labels.len();
        let v = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                1.0
            } else if labels[i] == labels[j] {
                inside
            } else {
                outside
            }
        });
        SelfSimilarityMatrix::new(v, SimilarityKind::Rbf).unwrap()
    }

    /// Border padding written out case by case.
    fn padded_oracle(s: &Array2<f64>, i: isize, j: isize) -> f64 {
        let n = s.nrows() as isize;
        let inside = |k: isize| (0..n).contains(&k);
        if inside(i) && inside(j) {
            return s[[i as usize, j as usize]];
        }
        let border = |k: isize| if k < 0 { 0 } else if k >= n { n - 1 } else { k };
        let (bi, bj) = (border(i), border(j));
        if i == j || bi != bj || n == 1 {
            return s[[bi as usize, bj as usize]];
        }
        // Two different bars stacked on the same border bar.
        let other = if bi == 0 { 1 } else { n - 2 };
        s[[bi as usize, other as usize]]
    }

    /// Direct evaluation of the correlation, one kernel tap at a time.
    fn novelty_oracle(s: &Array2<f64>, kernel: &Array2<f64>, half: usize) -> Vec<f64> {
        let n = s.nrows() as isize;
        (0..n)
            .map(|t| {
                let mut acc = 0.0;
                for p in 0..2 * half {
                    for q in 0..2 * half {
                        let i = t - half as isize + p as isize;
                        let j = t - half as isize + q as isize;
                        acc += kernel[[p, q]] * padded_oracle(s, i, j);
                    }
                }
                acc.max(0.0)
            })
            .collect()
    }

    #[test]
    fn untapered_unit_kernel() {
        let k = checkerboard_kernel(1, None);
        assert_eq!(k, ndarray::array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn kernel_sums_to_zero() {
        for m in 1..=16 {
            for sigma in [None, Some(0.5), Some(2.0)] {
                assert!(checkerboard_kernel(m, sigma).sum().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn taper_decays_outward() {
        let k = checkerboard_kernel(2, Some(0.5));
        assert!(k[[0, 0]].abs() < k[[1, 1]].abs());
        // Offsets (-1.5, -1.5) and (-0.5, -0.5) with width 1.
        assert!((k[[0, 0]] - (-2.25f64).exp()).abs() < 1e-12);
        assert!((k[[1, 1]] - (-0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn constant_ssm_has_zero_novelty() {
        let ssm = SelfSimilarityMatrix::new(Array2::from_elem((20, 20), 0.37), SimilarityKind::Rbf).unwrap();
        for m in [2, 8, 12, 16] {
            assert!(novelty_curve(&ssm, m, Some(0.5)).iter().all(|&v| v == 0.0));
        }
        let seg = segment_foote(&ssm, &FooteParams::new(8, 8)).unwrap();
        assert_eq!(seg.boundaries(), &[0, 20]);
    }

    #[test]
    fn two_block_novelty_peaks_at_joint() {
        let ssm = block_ssm(&[4, 4], 1.0, 0.0);
        for sigma in [None, Some(0.5)] {
            let n = novelty_curve(&ssm, 2, sigma);
            let argmax = (0..n.len()).max_by(|&a, &b| n[a].total_cmp(&n[b])).unwrap();
            assert_eq!(argmax, 4);
            assert!(n.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn no_edge_peaks_when_blocks_are_not_unit() {
        let v = Array2::from_shape_fn((30, 30), |(i, j)| if i == j { 1.0 } else { 0.6 });
        let ssm = SelfSimilarityMatrix::new(v, SimilarityKind::Rbf).unwrap();
        // The diagonal adds the same baseline at every bar, edges included.
        let n = novelty_curve(&ssm, 8, Some(0.5));
        assert!(n.iter().all(|&x| (x - n[15]).abs() < 1e-12), "{n:?}");
        let ssm = block_ssm(&[20, 20], 0.6, 0.1);
        let seg = segment_foote(&ssm, &FooteParams::new(8, 8)).unwrap();
        assert_eq!(seg.boundaries(), &[0, 20, 40]);
    }

    #[test]
    fn two_block_segmentation() {
        let ssm = block_ssm(&[4, 4], 1.0, 0.0);
        let seg = segment_foote(&ssm, &FooteParams::new(2, 3)).unwrap();
        assert_eq!(seg.boundaries(), &[0, 4, 8]);
    }

    #[test]
    fn three_blocks_of_eight() {
        let ssm = block_ssm(&[8, 8, 8], 1.0, 0.0);
        let seg = segment_foote(&ssm, &FooteParams::new(4, 8)).unwrap();
        assert_eq!(seg.boundaries(), &[0, 8, 16, 24]);
    }

    #[test]
    fn peak_picking_rules() {
        let rising: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(pick_peaks(&rising, 3).boundaries(), &[0, 10]);
        assert_eq!(pick_peaks(&[0.0; 10], 3).boundaries(), &[0, 10]);
        let mut spike = vec![0.0; 10];
        spike[4] = 1.0;
        assert_eq!(pick_peaks(&spike, 3).boundaries(), &[0, 4, 10]);
        // Plateau: the first index wins.
        let plateau = [0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        assert_eq!(pick_peaks(&plateau, 5).boundaries(), &[0, 2, 6]);
    }

    #[test]
    fn median_filter_shrinks_at_edges() {
        let m = median_filter(&[5.0, 1.0, 3.0, 2.0], 3);
        assert_eq!(m, vec![3.0, 3.0, 2.0, 2.5]);
    }

    #[test]
    fn invalid_params_rejected() {
        let ssm = block_ssm(&[4, 4], 1.0, 0.0);
        assert!(segment_foote(&ssm, &FooteParams::new(0, 3)).is_err());
        assert!(segment_foote(&ssm, &FooteParams::new(2, 0)).is_err());
        let p = FooteParams { taper_sigma: Some(0.0), ..FooteParams::new(2, 3) };
        assert!(segment_foote(&ssm, &p).is_err());
    }

    fn dyadic_ssm() -> impl Strategy<Value = Array2<f64>> {
        (4usize..24).prop_flat_map(|n| {
            prop::collection::vec(0u8..=16, n * n).prop_map(move |raw| {
                let mut v = Array2::from_shape_fn((n, n), |(i, j)| f64::from(raw[i * n + j]) / 16.0);
                for i in 0..n {
                    v[[i, i]] = 1.0;
                    for j in 0..i {
                        v[[i, j]] = v[[j, i]];
                    }
                }
                v
            })
        })
    }

    proptest! {
        #[test]
        fn paired_novelty_matches_direct_correlation(v in dyadic_ssm(), half in 1usize..6) {
            let ssm = SelfSimilarityMatrix::new(v.clone(), SimilarityKind::Rbf).unwrap();
            let kernel = checkerboard_kernel(half, Some(0.5));
            let fast = novelty_curve(&ssm, half, Some(0.5));
            let slow = novelty_oracle(&v, &kernel, half);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn boundaries_invariant_to_constant_offset(v in dyadic_ssm(), shift in 0u8..8, half in 1usize..5) {
            let shift = f64::from(shift) / 8.0;
            let a = SelfSimilarityMatrix::new(v.clone(), SimilarityKind::Rbf).unwrap();
            let b = SelfSimilarityMatrix::new(v.mapv(|x| x + shift), SimilarityKind::Rbf).unwrap();
            let p = FooteParams { kernel_size: half, median_size: 3, taper_sigma: None };
            prop_assert_eq!(segment_foote(&a, &p).unwrap(), segment_foote(&b, &p).unwrap());
        }
    }
}
