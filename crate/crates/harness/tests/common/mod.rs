#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use msa_harness::io::write_npy;

pub const BAR_SECONDS: f64 = 2.0;

/// One synthetic track: sections of bars, each section drawn around the
/// vector of its label.
pub struct SyntheticTrack {
    pub id: String,
    pub sections: Vec<(usize, usize)>,
    pub noise: f64,
    pub silent_ends: bool,
}

impl SyntheticTrack {
    pub fn n_bars(&self) -> usize {
        self.sections.iter().map(|s| s.1).sum()
    }

    pub fn joints(&self) -> Vec<usize> {
        let mut out = vec![0];
        for s in &self.sections {
            out.push(out.last().unwrap() + s.1);
        }
        out
    }
}

pub fn label_vectors(n_labels: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_labels)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn embedding(track: &SyntheticTrack, vectors: &[Vec<f64>], seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = track
        .sections
        .iter()
        .flat_map(|&(label, len)| std::iter::repeat_n(label, len))
        .collect();
    let dim = vectors[0].len();
    Array2::from_shape_fn((labels.len(), dim), |(i, d)| {
        vectors[labels[i]][d] + track.noise * rng.random_range(-1.0..1.0)
    })
}

fn annotation_text(track: &SyntheticTrack) -> String {
    let joints = track.joints();
    let end = joints.last().copied().unwrap() as f64 * BAR_SECONDS;
    let mut lines = Vec::new();
    for (i, w) in joints.windows(2).enumerate() {
        let label = (b'A' + track.sections[i].0 as u8) as char;
        let mut start = w[0] as f64 * BAR_SECONDS;
        let mut stop = w[1] as f64 * BAR_SECONDS;
        if track.silent_ends && i == 0 {
            lines.push("0.000000\t1.000000\tSilence".to_string());
            start = 1.0;
        }
        if track.silent_ends && w[1] == *joints.last().unwrap() {
            stop = end - 1.0;
        }
        lines.push(format!("{start:.6}\t{stop:.6}\t{label}"));
    }
    if track.silent_ends {
        lines.push(format!("{:.6}\t{end:.6}\tend", end - 1.0));
    }
    lines.join("\n") + "\n"
}

/// Writes embeddings, downbeats, annotations and a manifest for the tracks;
/// returns the manifest path.
pub fn write_dataset(dir: &Path, name: &str, tracks: &[SyntheticTrack], feature: &str, seed: u64) -> PathBuf {
    let root = dir.join(name);
    fs::create_dir_all(&root).unwrap();
    let vectors = label_vectors(8, 12, seed);
    let mut entries = Vec::new();
    for (i, track) in tracks.iter().enumerate() {
        let b = track.n_bars();
        let emb = embedding(track, &vectors, seed.wrapping_mul(1000).wrapping_add(i as u64));
        write_npy(root.join(format!("{}.npy", track.id)), &emb).unwrap();
        let downbeats: String = (0..b).map(|j| format!("{:.6}\n", j as f64 * BAR_SECONDS)).collect();
        fs::write(root.join(format!("{}.beats", track.id)), downbeats).unwrap();
        fs::write(root.join(format!("{}.tsv", track.id)), annotation_text(track)).unwrap();
        entries.push(serde_json::json!({
            "track_id": track.id,
            "embedding_paths": { feature: format!("{}.npy", track.id) },
            "downbeats_path": format!("{}.beats", track.id),
            "annotation_paths": [format!("{}.tsv", track.id)],
            "duration": b as f64 * BAR_SECONDS,
        }));
    }
    let manifest = serde_json::json!({ "dataset": name, "tracks": entries });
    let path = root.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}

/// Five tracks with repeated sections and mild noise.
pub fn five_tracks() -> Vec<SyntheticTrack> {
    let layouts: [&[(usize, usize)]; 5] = [
        &[(0, 8), (1, 8), (0, 8), (2, 8)],
        &[(3, 4), (0, 12), (1, 8), (0, 12)],
        &[(1, 16), (2, 8), (1, 16)],
        &[(0, 8), (1, 8), (2, 8), (3, 8), (0, 8)],
        &[(4, 6), (5, 10), (6, 10), (5, 10), (7, 4)],
    ];
    layouts
        .iter()
        .enumerate()
        .map(|(i, l)| SyntheticTrack {
            id: format!("track{i}"),
            sections: l.to_vec(),
            noise: 0.15,
            silent_ends: i % 2 == 1,
        })
        .collect()
}
