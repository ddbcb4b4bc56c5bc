use ndarray::{Array2, ArrayView2};

use super::mel::Spectrogram;
use crate::error::{invalid, Result};
use crate::types::{BarGrid, BarMatrix};

pub const DEFAULT_FRAMES_PER_BAR: usize = 96;

/// Indices `[lo, hi)` of the sorted `times` falling in `[start, end)`.
fn frames_in(times: &[f64], start: f64, end: f64) -> (usize, usize) {
    let lo = times.partition_point(|&t| t < start);
    let hi = times.partition_point(|&t| t < end);
    (lo, hi.max(lo))
}

/// Index of the frame closest to `target`; the earlier frame wins ties.
fn nearest_frame(times: &[f64], target: f64) -> usize {
    let right = times.partition_point(|&t| t < target);
    if right == 0 {
        return 0;
    }
    if right == times.len() {
        return times.len() - 1;
    }
    if target - times[right - 1] <= times[right] - target {
        right - 1
    } else {
        right
    }
}

/// Linearly resamples `rows` (n × F) to `out_rows` rows along time and
/// writes them flattened row-major into `out`.
fn resample_into(rows: ArrayView2<f64>, out_rows: usize, out: &mut [f64]) {
    let n = rows.nrows();
    let width = rows.ncols();
    for j in 0..out_rows {
        let pos = if out_rows == 1 {
            (n - 1) as f64 / 2.0
        } else {
            j as f64 * (n - 1) as f64 / (out_rows - 1) as f64
        };
        let left = (pos.floor() as usize).min(n - 1);
        let right = (left + 1).min(n - 1);
        let frac = pos - left as f64;
        let dst = &mut out[j * width..(j + 1) * width];
        for (f, d) in dst.iter_mut().enumerate() {
            let a = rows[[left, f]];
            let b = rows[[right, f]];
            *d = if frac == 0.0 { a } else { a + frac * (b - a) };
        }
    }
}

/// Barwise TF matrix: the spectrogram frames of each bar are resampled to
/// exactly `frames_per_bar` rows by linear interpolation and flattened into
/// one `frames_per_bar × F` vector per bar. Bars holding a single frame
/// replicate it; bars holding none replicate the frame nearest their center.
pub fn barwise_tf(spec: &Spectrogram, grid: &BarGrid, frames_per_bar: usize) -> Result<BarMatrix> {
    if frames_per_bar == 0 {
        return invalid("frames_per_bar must be at least 1");
    }
    let hop = spec.hop_seconds();
    let extent = (spec.n_frames() - 1) as f64 * hop;
    let grid_end = grid.bar_starts()[grid.n_bars()];
    if grid_end > extent + hop + 1e-9 {
        return invalid(format!(
            "bar grid ends at {grid_end:.3} s beyond the spectrogram extent {extent:.3} s"
        ));
    }

    let times: Vec<f64> = (0..spec.n_frames()).map(|t| spec.frame_time(t)).collect();
    let n_bins = spec.n_bins();
    let frames = spec.frames();
    let mut out = Array2::zeros((grid.n_bars(), frames_per_bar * n_bins));
    for i in 0..grid.n_bars() {
        let (start, end) = grid.bar(i);
        let (lo, hi) = frames_in(&times, start, end);
        let (lo, hi) = if hi == lo {
            let t = nearest_frame(&times, 0.5 * (start + end));
            (t, t + 1)
        } else {
            (lo, hi)
        };
        let mut row = out.row_mut(i);
        let dst = row
            .as_slice_mut()
            .expect("freshly allocated rows are contiguous");
        resample_into(frames.slice(ndarray::s![lo..hi, ..]), frames_per_bar, dst);
    }
    BarMatrix::new(out, "barwise_tf")
}

/// Averages frame-level features over each bar. A bar holding no frame
/// copies the frame nearest its center.
pub fn pool_barwise(
    frame_features: &Array2<f64>,
    frame_times: &[f64],
    grid: &BarGrid,
    feature_id: &str,
) -> Result<BarMatrix> {
    let n_frames = frame_features.nrows();
    if n_frames == 0 {
        return invalid("no frames to pool");
    }
    if frame_times.len() != n_frames {
        return invalid(format!(
            "{} frame times for {n_frames} frames",
            frame_times.len()
        ));
    }
    if frame_times.windows(2).any(|w| w[0] > w[1]) {
        return invalid("frame times are not non-decreasing");
    }

    let mut out = Array2::zeros((grid.n_bars(), frame_features.ncols()));
    for i in 0..grid.n_bars() {
        let (start, end) = grid.bar(i);
        let (lo, hi) = frames_in(frame_times, start, end);
        let mut row = out.row_mut(i);
        if hi > lo {
            for t in lo..hi {
                row += &frame_features.row(t);
            }
            row /= (hi - lo) as f64;
        } else {
            row.assign(&frame_features.row(nearest_frame(frame_times, 0.5 * (start + end))));
        }
    }
    BarMatrix::new(out, feature_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn spectrogram(frames: Array2<f64>, hop: f64) -> Spectrogram {
        Spectrogram::new(frames, hop, 22050).unwrap()
    }

    #[test]
    fn constant_spectrogram_gives_identical_rows() {
        let spec = spectrogram(Array2::from_elem((200, 3), 0.7), 0.05);
        let grid = BarGrid::new(vec![0.0, 2.0, 4.5, 9.9], 10.0).unwrap();
        let m = barwise_tf(&spec, &grid, 96).unwrap();
        assert_eq!(m.values().dim(), (3, 96 * 3));
        assert!(m.values().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn exactly_96_frames_is_identity() {
        let frames = Array2::from_shape_fn((96, 2), |(t, f)| (t * 10 + f) as f64);
        let spec = spectrogram(frames.clone(), 0.1);
        // Frame t sits at 0.1·t; the bar [0, 9.6) holds frames 0..96.
        let grid = BarGrid::new(vec![0.0, 9.55], 9.6).unwrap();
        let m = barwise_tf(&spec, &grid, 96).unwrap();
        let flat: Vec<f64> = frames.iter().copied().collect();
        assert_eq!(m.values().row(0).to_vec(), flat);
    }

    #[test]
    fn four_frames_become_a_linear_ramp() {
        let frames = array![[0.0], [1.0], [2.0], [3.0]];
        let spec = spectrogram(frames, 1.0);
        let grid = BarGrid::new(vec![0.0, 3.5], 4.0).unwrap();
        let m = barwise_tf(&spec, &grid, 96).unwrap();
        let row = m.values().row(0);
        assert_eq!(row[0], 0.0);
        assert_eq!(row[95], 3.0);
        for j in 0..96 {
            let expected = 3.0 * j as f64 / 95.0;
            assert!((row[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sub_hop_bar_replicates_nearest_frame() {
        let frames = array![[1.0], [2.0], [3.0], [4.0]];
        let spec = spectrogram(frames, 1.0);
        let grid = BarGrid::new(vec![0.0, 1.0, 1.2, 1.4, 3.0], 3.0).unwrap();
        let m = barwise_tf(&spec, &grid, 4).unwrap();
        // [1.2, 1.4) holds no frame; its center 1.3 is nearest frame 1.
        assert_eq!(m.values().row(2).to_vec(), vec![2.0; 4]);
        // [1.0, 1.2) holds only frame 1.
        assert_eq!(m.values().row(1).to_vec(), vec![2.0; 4]);
    }

    #[test]
    fn grid_beyond_spectrogram_rejected() {
        let spec = spectrogram(Array2::zeros((10, 2)), 0.5);
        let grid = BarGrid::new(vec![0.0, 3.0, 6.0], 6.0).unwrap();
        assert!(barwise_tf(&spec, &grid, 8).is_err());
    }

    #[test]
    fn pooling_means_and_nearest_fallback() {
        let feats = array![[1.0], [3.0], [5.0], [7.0]];
        let times = [0.1, 0.6, 1.1, 1.6];
        let grid = BarGrid::new(vec![0.0, 1.0, 2.0, 3.0], 3.0).unwrap();
        let m = pool_barwise(&feats, &times, &grid, "x").unwrap();
        assert_eq!(m.values().column(0).to_vec(), vec![2.0, 6.0, 7.0]);
    }

    #[test]
    fn pooling_two_frame_mean() {
        let feats = array![[1.0, 0.0], [0.0, 1.0]];
        let grid = BarGrid::new(vec![0.0, 1.0], 1.0).unwrap();
        let m = pool_barwise(&feats, &[0.2, 0.7], &grid, "x").unwrap();
        assert_eq!(m.values().row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn pooling_constant_frames() {
        let feats = Array2::from_shape_fn((50, 3), |(_, f)| f as f64 + 0.5);
        let times: Vec<f64> = (0..50).map(|t| t as f64 * 0.2).collect();
        let grid = BarGrid::new(vec![0.0, 2.0, 4.0, 9.0, 12.0], 12.0).unwrap();
        let m = pool_barwise(&feats, &times, &grid, "x").unwrap();
        for r in m.values().rows() {
            assert_eq!(r.to_vec(), vec![0.5, 1.5, 2.5]);
        }
    }

    #[test]
    fn pooling_rejects_empty_and_unsorted() {
        let grid = BarGrid::new(vec![0.0, 1.0], 1.0).unwrap();
        assert!(pool_barwise(&Array2::zeros((0, 2)), &[], &grid, "x").is_err());
        assert!(pool_barwise(&Array2::zeros((2, 2)), &[0.5, 0.1], &grid, "x").is_err());
    }
}
