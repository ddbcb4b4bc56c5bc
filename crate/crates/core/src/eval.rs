//! Boundary hit-rate evaluation: maximum matching within a tolerance window,
//! trimming protocols and best-of-annotations selection.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MsaError, Result};
use crate::types::Annotation;

/// The two standard tolerances, in seconds.
pub const TOLERANCES: [f64; 2] = [0.5, 3.0];

pub const DEFAULT_SILENCE_LABELS: [&str; 4] = ["silence", "silent", "end", "z"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trimming {
    None,
    Trim,
    DoubleTrim,
}

impl Trimming {
    pub const ALL: [Trimming; 3] = [Trimming::None, Trimming::Trim, Trimming::DoubleTrim];

    pub fn as_str(self) -> &'static str {
        match self {
            Trimming::None => "none",
            Trimming::Trim => "trim",
            Trimming::DoubleTrim => "double_trim",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tolerance: f64,
    pub trimming: Trimming,
}

/// Size of a maximum matching between `reference` and `estimate` where a
/// pair matches iff `|r - e| <= window`. Both lists must be sorted.
///
/// Every reference accepts an interval of estimates and those intervals are
/// ordered like the references, so matching each reference to the earliest
/// unused acceptable estimate is optimal.
pub fn match_boundaries(reference: &[f64], estimate: &[f64], window: f64) -> usize {
    let mut hits = 0;
    let mut next = 0;
    for &r in reference {
        while next < estimate.len() && r - estimate[next] > window {
            next += 1;
        }
        if next < estimate.len() && (estimate[next] - r).abs() <= window {
            hits += 1;
            next += 1;
        }
    }
    hits
}

fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Precision, recall and F-measure of an estimate at one tolerance.
/// Empty lists give a zero ratio.
pub fn detection_score(reference: &[f64], estimate: &[f64], window: f64) -> DetectionScore {
    let hits = match_boundaries(reference, estimate, window) as f64;
    let ratio = |n: usize| if n == 0 { 0.0 } else { hits / n as f64 };
    let precision = ratio(estimate.len());
    let recall = ratio(reference.len());
    DetectionScore {
        precision,
        recall,
        f_measure: f_measure(precision, recall),
        tolerance: window,
        trimming: Trimming::None,
    }
}

/// Drops `per_end` boundaries from each end of the list.
pub fn trim_n(boundaries: &[f64], per_end: usize) -> Vec<f64> {
    if boundaries.len() <= 2 * per_end {
        return Vec::new();
    }
    boundaries[per_end..boundaries.len() - per_end].to_vec()
}

/// Drops the first and last boundary (track start and end).
pub fn trim(boundaries: &[f64]) -> Vec<f64> {
    trim_n(boundaries, 1)
}

/// Options shared by the trimming protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Labels (case-insensitive) marking silent extremity segments.
    pub silence_labels: Vec<String>,
    /// Boundaries removed at each end by trimming.
    pub trim_per_end: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            silence_labels: DEFAULT_SILENCE_LABELS.iter().map(|s| s.to_string()).collect(),
            trim_per_end: 1,
        }
    }
}

impl EvalOptions {
    fn is_silent(&self, label: &str) -> bool {
        let label = label.trim();
        self.silence_labels.iter().any(|s| s.eq_ignore_ascii_case(label))
    }
}

/// Removes silent segments from both ends of the annotation.
pub fn double_trim(annotation: &Annotation, options: &EvalOptions) -> Result<Annotation> {
    let segs = annotation.segments();
    let first = segs.iter().position(|s| !options.is_silent(&s.label));
    let last = segs.iter().rposition(|s| !options.is_silent(&s.label));
    match (first, last) {
        (Some(a), Some(b)) => Annotation::new(segs[a..=b].to_vec()),
        _ => Err(MsaError::EmptyAnnotation),
    }
}

/// Clamps estimated boundaries into `[start, end]`, makes sure both ends are
/// present and removes duplicates.
pub fn clip_to_interval(estimate: &[f64], start: f64, end: f64) -> Vec<f64> {
    let mut out: Vec<f64> = estimate.iter().map(|&t| t.clamp(start, end)).collect();
    out.push(start);
    out.push(end);
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    out
}

/// Reference and estimate boundary lists after applying a trimming mode.
pub fn prepare_boundaries(
    reference: &Annotation,
    estimate: &[f64],
    trimming: Trimming,
    options: &EvalOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = options.trim_per_end;
    Ok(match trimming {
        Trimming::None => (reference.boundaries(), estimate.to_vec()),
        Trimming::Trim => (trim_n(&reference.boundaries(), n), trim_n(estimate, n)),
        Trimming::DoubleTrim => {
            let active = double_trim(reference, options)?;
            let clipped = clip_to_interval(estimate, active.start(), active.end());
            (trim_n(&active.boundaries(), n), trim_n(&clipped, n))
        }
    })
}

/// Scores the estimate against every reference and keeps the highest F
/// (lowest index on ties). Returns the score and the chosen index.
pub fn best_of_annotations(
    references: &[Annotation],
    estimate: &[f64],
    window: f64,
    trimming: Trimming,
    options: &EvalOptions,
) -> Result<(DetectionScore, usize)> {
    if references.is_empty() {
        return invalid("no reference annotation");
    }
    let mut best: Option<(DetectionScore, usize)> = None;
    for (idx, reference) in references.iter().enumerate() {
        let (r, e) = prepare_boundaries(reference, estimate, trimming, options)?;
        let mut score = detection_score(&r, &e, window);
        score.trimming = trimming;
        if best.as_ref().is_none_or(|(b, _)| score.f_measure > b.f_measure) {
            best = Some((score, idx));
        }
    }
    Ok(best.expect("non-empty references"))
}

/// One (tolerance, trimming) cell of a track evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    #[serde(flatten)]
    pub score: DetectionScore,
    /// Index of the reference annotation that produced the score.
    pub annotation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEval {
    pub track_id: String,
    /// Sorted by trimming, then tolerance.
    pub scores: Vec<CellScore>,
}

impl TrackEval {
    pub fn get(&self, tolerance: f64, trimming: Trimming) -> Option<&DetectionScore> {
        self.scores
            .iter()
            .find(|c| c.score.trimming == trimming && c.score.tolerance == tolerance)
            .map(|c| &c.score)
    }
}

/// Scores an estimate at both standard tolerances for each trimming mode,
/// choosing the best reference independently per cell.
pub fn evaluate_track(
    track_id: &str,
    references: &[Annotation],
    estimate: &[f64],
    trimmings: &[Trimming],
    options: &EvalOptions,
) -> Result<TrackEval> {
    let mut modes = trimmings.to_vec();
    modes.sort();
    modes.dedup();
    let mut scores = Vec::with_capacity(modes.len() * TOLERANCES.len());
    for &trimming in &modes {
        for &tolerance in &TOLERANCES {
            let (score, annotation) =
                best_of_annotations(references, estimate, tolerance, trimming, options)?;
            scores.push(CellScore { score, annotation });
        }
    }
    Ok(TrackEval {
        track_id: track_id.to_string(),
        scores,
    })
}
