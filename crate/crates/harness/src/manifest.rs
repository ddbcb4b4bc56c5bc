//! Dataset manifests: one JSON file per dataset listing its tracks.
//!
//! ```json
//! {
//!   "dataset": "rwc_pop",
//!   "tracks": [{
//!     "track_id": "RM-P001",
//!     "audio_path": "audio/RM-P001.wav",
//!     "embedding_paths": {"mert": "emb/mert/RM-P001.npy"},
//!     "frame_hops": {"mert": 0.0133},
//!     "downbeats_path": "downbeats/RM-P001.txt",
//!     "annotation_paths": ["ann/RM-P001.tsv"],
//!     "duration": 251.3
//!   }]
//! }
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackManifest {
    pub track_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<PathBuf>,
    /// Feature id → bar- or frame-level matrix file.
    #[serde(default)]
    pub embedding_paths: BTreeMap<String, PathBuf>,
    pub downbeats_path: PathBuf,
    pub annotation_paths: Vec<PathBuf>,
    /// Track duration in seconds.
    pub duration: f64,
    /// Feature id → frame hop in seconds, for frame-level matrices that need
    /// pooling to bars.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub frame_hops: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub tracks: Vec<TrackManifest>,
}

impl TrackManifest {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.track_id.trim().is_empty() {
            return Err("empty track_id".into());
        }
        if self.audio_path.is_none() && self.embedding_paths.is_empty() {
            return Err(format!("track {}: needs audio_path or embedding_paths", self.track_id));
        }
        if self.annotation_paths.is_empty() {
            return Err(format!("track {}: needs at least one annotation", self.track_id));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!("track {}: bad duration {}", self.track_id, self.duration));
        }
        if let Some((id, hop)) = self.frame_hops.iter().find(|(_, &h)| !(h.is_finite() && h > 0.0)) {
            return Err(format!("track {}: bad frame hop {hop} for {id}", self.track_id));
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.audio_path.as_mut() {
            join(p);
        }
        self.embedding_paths.values_mut().for_each(join);
        join(&mut self.downbeats_path);
        self.annotation_paths.iter_mut().for_each(join);
    }

    /// Every input file the track may read, in a stable order.
    pub fn input_files(&self) -> Vec<&Path> {
        let mut files: Vec<&Path> = Vec::new();
        files.extend(self.audio_path.as_deref());
        files.extend(self.embedding_paths.values().map(PathBuf::as_path));
        files.push(&self.downbeats_path);
        files.extend(self.annotation_paths.iter().map(PathBuf::as_path));
        files
    }
}

impl DatasetManifest {
    pub fn from_json(text: &str, base_dir: &Path) -> std::result::Result<Self, String> {
        let mut manifest: DatasetManifest = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if manifest.dataset.trim().is_empty() {
            return Err("empty dataset name".into());
        }
        if manifest.tracks.is_empty() {
            return Err("manifest lists no tracks".into());
        }
        let mut seen = BTreeSet::new();
        for track in &mut manifest.tracks {
            track.validate()?;
            if !seen.insert(track.track_id.clone()) {
                return Err(format!("duplicate track_id {}", track.track_id));
            }
            track.resolve(base_dir);
        }
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_json(&text, base).map_err(|message| HarnessError::Manifest {
            path: path.to_path_buf(),
            message,
        })
    }
}
