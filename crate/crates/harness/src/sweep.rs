//! Grid sweeps over datasets with a content-addressed result cache.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use msa_core::eval::{CellScore, TrackEval};

use crate::config::{Algorithm, SegmenterConfig};
use crate::error::{io_err, HarnessError, Result};
use crate::io::write_atomic;
use crate::manifest::{DatasetManifest, TrackManifest};
use crate::pipeline::{evaluate_config, load_track, RunSettings, TrackInputs};

const CACHE_FORMAT: &str = "msa-sweep-cache-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub track_id: String,
    pub feature_id: String,
    pub algorithm: Algorithm,
    pub config_id: String,
    pub config: SegmenterConfig,
    pub scores: Vec<CellScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTrack {
    pub dataset: String,
    pub track_id: String,
    /// `None` when the whole track was skipped.
    pub config_id: Option<String>,
    pub reason: String,
}

/// The track × config × metric table of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub feature_id: String,
    pub settings: RunSettings,
    pub rows: Vec<ResultRow>,
    pub skipped: Vec<SkippedTrack>,
}

impl SweepResults {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
}

impl CacheStats {
    pub fn hit_ratio(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub datasets: Vec<DatasetManifest>,
    pub feature_id: String,
    pub configs: Vec<SegmenterConfig>,
    pub settings: RunSettings,
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

/// Files whose contents determine a track's results for one feature.
fn relevant_files<'a>(track: &'a TrackManifest, feature_id: &str) -> Vec<&'a Path> {
    let mut files = vec![track.downbeats_path.as_path()];
    files.extend(track.annotation_paths.iter().map(PathBuf::as_path));
    match track.embedding_paths.get(feature_id) {
        Some(p) => files.push(p),
        None => files.extend(track.audio_path.as_deref()),
    }
    files
}

fn track_fingerprint(track: &TrackManifest, feature_id: &str) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(track.track_id.as_bytes());
    hasher.update(track.duration.to_le_bytes());
    if let Some(hop) = track.frame_hops.get(feature_id) {
        hasher.update(hop.to_le_bytes());
    }
    for path in relevant_files(track, feature_id) {
        let bytes = fs::read(path).map_err(io_err(path))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(Sha256::digest(&bytes));
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Serialize)]
struct CacheKey<'a> {
    format: &'a str,
    track: &'a str,
    feature_id: &'a str,
    config: &'a SegmenterConfig,
    settings: &'a RunSettings,
}

fn cache_key(fingerprint: &str, feature_id: &str, config: &SegmenterConfig, settings: &RunSettings) -> String {
    let key = CacheKey {
        format: CACHE_FORMAT,
        track: fingerprint,
        feature_id,
        config,
        settings,
    };
    let json = serde_json::to_vec(&key).expect("key serializes");
    hex::encode(Sha256::digest(json))
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(&key[..2]).join(format!("{key}.json"))
}

fn cache_read(dir: &Path, key: &str) -> Option<TrackEval> {
    let text = fs::read_to_string(cache_path(dir, key)).ok()?;
    match serde_json::from_str(&text) {
        Ok(eval) => Some(eval),
        Err(e) => {
            log::warn!("ignoring unreadable cache entry {key}: {e}");
            None
        }
    }
}

fn cache_write(dir: &Path, key: &str, eval: &TrackEval) -> Result<()> {
    let path = cache_path(dir, key);
    let parent = path.parent().expect("cache entries live in a subdirectory");
    fs::create_dir_all(parent).map_err(io_err(parent))?;
    write_atomic(&path, &serde_json::to_vec(eval).expect("eval serializes"))
}

struct TrackResult {
    rows: Vec<ResultRow>,
    skipped: Vec<SkippedTrack>,
    stats: CacheStats,
}

fn skip(dataset: &str, track_id: &str, config_id: Option<String>, reason: String) -> SkippedTrack {
    log::warn!("skipping {dataset}/{track_id} {}: {reason}", config_id.as_deref().unwrap_or(""));
    SkippedTrack {
        dataset: dataset.to_string(),
        track_id: track_id.to_string(),
        config_id,
        reason,
    }
}

fn sweep_track(request: &SweepRequest, dataset: &str, track: &TrackManifest) -> Result<TrackResult> {
    let feature_id = request.feature_id.as_str();
    let settings = &request.settings;
    let mut out = TrackResult {
        rows: Vec::new(),
        skipped: Vec::new(),
        stats: CacheStats::default(),
    };
    let row = |config: &SegmenterConfig, eval: TrackEval| ResultRow {
        dataset: dataset.to_string(),
        track_id: track.track_id.clone(),
        feature_id: feature_id.to_string(),
        algorithm: config.algorithm(),
        config_id: config.id(),
        config: *config,
        scores: eval.scores,
    };

    let fingerprint = match track_fingerprint(track, feature_id) {
        Ok(f) => f,
        Err(e) => {
            out.skipped.push(skip(dataset, &track.track_id, None, e.to_string()));
            return Ok(out);
        }
    };

    let mut pending = Vec::new();
    for config in &request.configs {
        let key = cache_key(&fingerprint, feature_id, config, settings);
        match request.cache_dir.as_deref().and_then(|dir| cache_read(dir, &key)) {
            Some(eval) => {
                out.stats.hits += 1;
                out.rows.push(row(config, eval));
            }
            None => pending.push((config, key)),
        }
    }
    if pending.is_empty() {
        return Ok(out);
    }
    out.stats.misses += pending.len();

    let inputs: TrackInputs = match load_track(track, feature_id, settings.frames_per_bar) {
        Ok(inputs) => inputs,
        Err(e) => {
            out.skipped.push(skip(dataset, &track.track_id, None, e.to_string()));
            return Ok(out);
        }
    };
    let computed: Vec<_> = pending
        .par_iter()
        .map(|(config, key)| (config, key, evaluate_config(&inputs, config, settings)))
        .collect();
    for (config, key, result) in computed {
        match result {
            Ok(eval) => {
                if let Some(dir) = request.cache_dir.as_deref() {
                    cache_write(dir, key, &eval)?;
                }
                out.rows.push(row(config, eval));
            }
            Err(e) => out
                .skipped
                .push(skip(dataset, &track.track_id, Some(config.id()), e.to_string())),
        }
    }
    Ok(out)
}

/// Evaluates every configuration on every track. Track-level problems are
/// recorded in `skipped`; only cache write failures abort the sweep.
pub fn sweep(request: &SweepRequest) -> Result<(SweepResults, CacheStats)> {
    if request.configs.is_empty() {
        return Err(HarnessError::Invalid("no configurations to sweep".into()));
    }
    if request.datasets.iter().all(|d| d.tracks.is_empty()) {
        return Err(HarnessError::Invalid("no tracks to sweep".into()));
    }
    if let Some(dir) = &request.cache_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(request.jobs)
        .build()
        .map_err(|e| HarnessError::Invalid(format!("cannot start worker pool: {e}")))?;

    let work: Vec<(&str, &TrackManifest)> = request
        .datasets
        .iter()
        .flat_map(|d| d.tracks.iter().map(move |t| (d.dataset.as_str(), t)))
        .collect();
    let per_track: Vec<Result<TrackResult>> = pool.install(|| {
        work.par_iter()
            .map(|(dataset, track)| sweep_track(request, dataset, track))
            .collect()
    });

    let mut results = SweepResults {
        feature_id: request.feature_id.clone(),
        settings: request.settings.clone(),
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    let mut stats = CacheStats::default();
    for track in per_track {
        let track = track?;
        results.rows.extend(track.rows);
        results.skipped.extend(track.skipped);
        stats.hits += track.stats.hits;
        stats.misses += track.stats.misses;
    }
    results.rows.sort_by(|a, b| {
        (&a.dataset, &a.track_id, &a.config_id).cmp(&(&b.dataset, &b.track_id, &b.config_id))
    });
    results.skipped.sort_by(|a, b| {
        (&a.dataset, &a.track_id, &a.config_id).cmp(&(&b.dataset, &b.track_id, &b.config_id))
    });
    Ok((results, stats))
}
