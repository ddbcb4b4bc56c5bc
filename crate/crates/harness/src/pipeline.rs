//! Per-track pipeline: features → (pool) → SSM → segment → seconds → scores.

use serde::{Deserialize, Serialize};

use msa_core::eval::{evaluate_track, EvalOptions, TrackEval, Trimming};
use msa_core::features::{barwise_tf, decode_audio, log_mel, pool_barwise, MelConfig, DEFAULT_FRAMES_PER_BAR};
use msa_core::{bars_from_downbeats, Annotation, BarGrid, BarMatrix};

use crate::config::{segment, SegmenterConfig, SegmenterOptions};
use crate::error::{HarnessError, Result};
use crate::io::{read_annotation, read_matrix, read_times};
use crate::manifest::TrackManifest;

/// The feature computed from audio when no embedding file is given.
pub const BARWISE_TF: &str = "barwise_tf";

/// Everything besides the segmenter configuration that affects a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub segmenter: SegmenterOptions,
    pub eval: EvalOptions,
    pub trimmings: Vec<Trimming>,
    pub frames_per_bar: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            segmenter: SegmenterOptions::default(),
            eval: EvalOptions::default(),
            trimmings: Trimming::ALL.to_vec(),
            frames_per_bar: DEFAULT_FRAMES_PER_BAR,
        }
    }
}

/// Parsed inputs of one track, shared by every configuration.
#[derive(Debug, Clone)]
pub struct TrackInputs {
    pub track_id: String,
    pub grid: BarGrid,
    pub features: BarMatrix,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackOutcome {
    Evaluated(TrackEval),
    Skipped { track_id: String, reason: String },
}

/// Computes the Barwise TF matrix of an audio file.
pub fn barwise_tf_from_audio(
    audio_path: &std::path::Path,
    grid: &BarGrid,
    frames_per_bar: usize,
) -> Result<BarMatrix> {
    let audio = decode_audio(audio_path)?;
    let spec = log_mel(&audio.samples, audio.sample_rate, MelConfig::default())?;
    Ok(barwise_tf(&spec, grid, frames_per_bar)?)
}

fn load_features(track: &TrackManifest, feature_id: &str, grid: &BarGrid, frames_per_bar: usize) -> Result<BarMatrix> {
    if let Some(path) = track.embedding_paths.get(feature_id) {
        let matrix = read_matrix(path)?;
        if matrix.nrows() == grid.n_bars() {
            return Ok(BarMatrix::new(matrix, feature_id)?);
        }
        let Some(&hop) = track.frame_hops.get(feature_id) else {
            return Err(HarnessError::Invalid(format!(
                "{}: {} rows for {} bars and no frame hop to pool with",
                path.display(),
                matrix.nrows(),
                grid.n_bars()
            )));
        };
        let times: Vec<f64> = (0..matrix.nrows()).map(|t| t as f64 * hop).collect();
        return Ok(pool_barwise(&matrix, &times, grid, feature_id)?);
    }
    match (&track.audio_path, feature_id) {
        (Some(audio), BARWISE_TF) => barwise_tf_from_audio(audio, grid, frames_per_bar),
        _ => Err(HarnessError::Invalid(format!("no source for feature {feature_id:?}"))),
    }
}

pub fn load_track(track: &TrackManifest, feature_id: &str, frames_per_bar: usize) -> Result<TrackInputs> {
    let downbeats = read_times(&track.downbeats_path)?;
    let grid = bars_from_downbeats(&downbeats, track.duration)?;
    let annotations = track
        .annotation_paths
        .iter()
        .map(read_annotation)
        .collect::<Result<Vec<_>>>()?;
    let features = load_features(track, feature_id, &grid, frames_per_bar)?;
    if features.n_bars() < 2 {
        log::warn!("track {}: only {} bar(s)", track.track_id, features.n_bars());
    }
    Ok(TrackInputs {
        track_id: track.track_id.clone(),
        grid,
        features,
        annotations,
    })
}

/// Estimated boundaries in seconds for one configuration.
pub fn estimate(inputs: &TrackInputs, config: &SegmenterConfig, options: &SegmenterOptions) -> Result<Vec<f64>> {
    let segmentation = segment(&inputs.features, config, options)?;
    Ok(segmentation.to_seconds(&inputs.grid)?)
}

pub fn evaluate_config(inputs: &TrackInputs, config: &SegmenterConfig, settings: &RunSettings) -> Result<TrackEval> {
    let boundaries = estimate(inputs, config, &settings.segmenter)?;
    Ok(evaluate_track(
        &inputs.track_id,
        &inputs.annotations,
        &boundaries,
        &settings.trimmings,
        &settings.eval,
    )?)
}

/// Runs one configuration end to end. Unreadable or inconsistent inputs
/// skip the track instead of failing.
pub fn run_track(
    track: &TrackManifest,
    feature_id: &str,
    config: &SegmenterConfig,
    settings: &RunSettings,
) -> TrackOutcome {
    let result = load_track(track, feature_id, settings.frames_per_bar)
        .and_then(|inputs| evaluate_config(&inputs, config, settings));
    match result {
        Ok(eval) => TrackOutcome::Evaluated(eval),
        Err(e) => {
            log::warn!("skipping track {}: {e}", track.track_id);
            TrackOutcome::Skipped {
                track_id: track.track_id.clone(),
                reason: e.to_string(),
            }
        }
    }
}
