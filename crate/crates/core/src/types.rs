//! Domain types shared by every stage of the pipeline.

use ndarray::Array2;

use crate::error::{invalid, MsaError, Result};
use crate::stats::median;

/// Audio before the first downbeat becomes its own bar only when it is
/// longer than this many seconds.
pub const LEADING_BAR_MIN_SECONDS: f64 = 0.5;

/// Annotation segments may leave gaps or overlaps up to this size.
pub const ANNOTATION_CONTIGUITY_TOLERANCE: f64 = 0.010;

const DURATION_SLACK: f64 = 1e-6;

/// Downbeat-delimited time intervals. Entry `i` of `bar_starts` is the start
/// of bar `i`; the final entry closes the last bar.
#[derive(Debug, Clone, PartialEq)]
pub struct BarGrid {
    bar_starts: Vec<f64>,
    track_duration: f64,
}

impl BarGrid {
    pub fn new(bar_starts: Vec<f64>, track_duration: f64) -> Result<Self> {
        if bar_starts.len() < 2 {
            return invalid("a bar grid needs at least one bar (two edges)");
        }
        if bar_starts.iter().any(|t| !t.is_finite()) || !track_duration.is_finite() {
            return invalid("bar grid contains a non-finite time");
        }
        if bar_starts[0] < 0.0 {
            return invalid(format!("first bar starts before 0 ({})", bar_starts[0]));
        }
        if let Some(w) = bar_starts.windows(2).position(|w| w[0] >= w[1]) {
            return invalid(format!("bar starts not strictly increasing at index {}", w + 1));
        }
        let end = bar_starts[bar_starts.len() - 1];
        if end > track_duration + DURATION_SLACK {
            return invalid(format!("last bar ends at {end} after track end {track_duration}"));
        }
        Ok(Self {
            bar_starts,
            track_duration,
        })
    }

    /// Number of bars `B`.
    pub fn n_bars(&self) -> usize {
        self.bar_starts.len() - 1
    }

    /// All `B + 1` bar edges in seconds.
    pub fn bar_starts(&self) -> &[f64] {
        &self.bar_starts
    }

    pub fn track_duration(&self) -> f64 {
        self.track_duration
    }

    /// `(start, end)` of bar `i`.
    pub fn bar(&self, i: usize) -> (f64, f64) {
        (self.bar_starts[i], self.bar_starts[i + 1])
    }
}

/// Builds the bar grid from estimated downbeats.
///
/// A pickup bar `[0, downbeats[0])` is prepended when the first downbeat is
/// later than [`LEADING_BAR_MIN_SECONDS`]. The last bar is closed at
/// `min(track_duration, last + median bar length)`, the median being taken
/// over the bar-start list including any prepended pickup bar so that the
/// rule is a fixed point when re-applied to its own output.
pub fn bars_from_downbeats(downbeats: &[f64], track_duration: f64) -> Result<BarGrid> {
    if downbeats.is_empty() {
        return invalid("empty downbeat list");
    }
    if !track_duration.is_finite() || track_duration <= 0.0 {
        return invalid(format!("track duration must be positive, got {track_duration}"));
    }
    if downbeats.iter().any(|t| !t.is_finite()) {
        return invalid("downbeat list contains a non-finite time");
    }
    if downbeats.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("downbeats are not strictly increasing");
    }
    if downbeats[0] < 0.0 || downbeats[downbeats.len() - 1] > track_duration + DURATION_SLACK {
        return invalid("downbeats fall outside [0, track_duration]");
    }

    let mut starts = Vec::with_capacity(downbeats.len() + 2);
    if downbeats[0] > LEADING_BAR_MIN_SECONDS {
        starts.push(0.0);
    }
    starts.extend_from_slice(downbeats);

    let last = starts[starts.len() - 1];
    let intervals: Vec<f64> = starts.windows(2).map(|w| w[1] - w[0]).collect();
    let end = match median(&intervals) {
        Some(bar_len) => track_duration.min(last + bar_len),
        None => track_duration,
    };
    if end - last > 1e-9 {
        starts.push(end);
    } else if starts.len() >= 2 {
        // The last downbeat sits on the track end: it closes the previous bar.
        let n = starts.len();
        starts[n - 1] = starts[n - 1].min(track_duration);
    } else {
        return invalid("single downbeat at the very end of the track leaves no bar");
    }
    BarGrid::new(starts, track_duration)
}

/// One feature vector per bar.
#[derive(Debug, Clone, PartialEq)]
pub struct BarMatrix {
    values: Array2<f64>,
    feature_id: String,
}

impl BarMatrix {
    pub fn new(values: Array2<f64>, feature_id: impl Into<String>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return invalid(format!("empty bar matrix {:?}", values.dim()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite entry at flat index {pos}"));
        }
        Ok(Self {
            values,
            feature_id: feature_id.into(),
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn feature_id(&self) -> &str {
        &self.feature_id
    }

    pub fn n_bars(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Checks that the matrix has one row per bar of `grid`.
    pub fn check_grid(&self, grid: &BarGrid) -> Result<()> {
        if self.n_bars() != grid.n_bars() {
            return invalid(format!(
                "feature matrix has {} rows but the bar grid has {} bars",
                self.n_bars(),
                grid.n_bars()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimilarityKind {
    Rbf,
    Cosine,
    LsdAffinity,
}

/// Square, symmetric similarity matrix between bars.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarityMatrix {
    values: Array2<f64>,
    kind: SimilarityKind,
}

impl SelfSimilarityMatrix {
    /// Wraps a matrix after checking shape, finiteness and symmetry (1e-9).
    pub fn new(values: Array2<f64>, kind: SimilarityKind) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return invalid(format!("SSM must be square and non-empty, got {:?}", values.dim()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("SSM contains a non-finite entry");
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (values[[i, j]] - values[[j, i]]).abs() > 1e-9 {
                    return invalid(format!("SSM not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Self { values, kind })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn n_bars(&self) -> usize {
        self.values.nrows()
    }
}

/// Strictly increasing bar indices from `0` to `B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segmentation {
    boundaries: Vec<usize>,
}

impl Segmentation {
    pub fn new(boundaries: Vec<usize>, n_bars: usize) -> Result<Self> {
        if n_bars == 0 {
            return invalid("segmentation of zero bars");
        }
        if boundaries.len() < 2 || boundaries[0] != 0 || boundaries[boundaries.len() - 1] != n_bars
        {
            return invalid(format!("boundaries must run from 0 to {n_bars}: {boundaries:?}"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return invalid(format!("boundaries not strictly increasing: {boundaries:?}"));
        }
        Ok(Self { boundaries })
    }

    /// The trivial segmentation `[0, B]`.
    pub fn whole(n_bars: usize) -> Self {
        Self {
            boundaries: vec![0, n_bars],
        }
    }

    /// Builds a segmentation from any collection of interior candidates;
    /// `0` and `B` are added, duplicates and out-of-range values dropped.
    pub(crate) fn from_candidates(candidates: impl IntoIterator<Item = usize>, n_bars: usize) -> Self {
        let mut b: Vec<usize> = candidates
            .into_iter()
            .filter(|&t| t > 0 && t < n_bars)
            .collect();
        b.push(0);
        b.push(n_bars);
        b.sort_unstable();
        b.dedup();
        Self { boundaries: b }
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn n_bars(&self) -> usize {
        self.boundaries[self.boundaries.len() - 1]
    }

    pub fn n_segments(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Projects the boundaries through a bar grid.
    pub fn to_seconds(&self, grid: &BarGrid) -> Result<Vec<f64>> {
        boundaries_to_seconds(&self.boundaries, grid)
    }
}

/// Looks up bar indices in `grid.bar_starts()`.
pub fn boundaries_to_seconds(boundaries: &[usize], grid: &BarGrid) -> Result<Vec<f64>> {
    let starts = grid.bar_starts();
    boundaries
        .iter()
        .map(|&b| {
            starts.get(b).copied().ok_or_else(|| {
                MsaError::InvalidInput(format!("boundary {b} beyond bar count {}", grid.n_bars()))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSegment {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

/// Reference segmentation of a track: contiguous labelled segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    segments: Vec<AnnotatedSegment>,
}

impl Annotation {
    pub fn new(segments: Vec<AnnotatedSegment>) -> Result<Self> {
        if segments.is_empty() {
            return invalid("annotation without segments");
        }
        if segments.iter().any(|s| !s.start.is_finite() || !s.end.is_finite()) {
            return invalid("annotation contains a non-finite time");
        }
        if segments[0].start < 0.0 {
            return invalid("annotation starts before 0");
        }
        for (i, s) in segments.iter().enumerate() {
            if s.end <= s.start {
                return invalid(format!("segment {i} has end {} <= start {}", s.end, s.start));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            if (w[0].end - w[1].start).abs() > ANNOTATION_CONTIGUITY_TOLERANCE {
                return invalid(format!(
                    "segments {i} and {} are not contiguous ({} vs {})",
                    i + 1,
                    w[0].end,
                    w[1].start
                ));
            }
            if w[1].end <= w[0].end {
                return invalid(format!("segment ends do not increase at {}", i + 1));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[AnnotatedSegment] {
        &self.segments
    }

    /// Segment starts followed by the end of the last segment.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.start).collect();
        b.push(self.segments[self.segments.len() - 1].end);
        b
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }
}
