mod common;

use std::fs;

use msa_core::eval::Trimming;
use msa_harness::config::{CbmKernelChoice, SegmenterConfig, Similarity, SweepGrid};
use msa_harness::io::write_npy;
use msa_harness::manifest::DatasetManifest;
use msa_harness::pipeline::{load_track, run_track, RunSettings, TrackOutcome};
use msa_harness::sweep::{sweep, SweepRequest};
use ndarray::Array2;

use common::{write_dataset, SyntheticTrack};

const CBM_FULL_RBF: SegmenterConfig = SegmenterConfig::Cbm {
    kernel: CbmKernelChoice::Full,
    similarity: Similarity::Rbf,
};

fn ideal_track() -> SyntheticTrack {
    SyntheticTrack {
        id: "ideal".into(),
        sections: vec![(0, 8), (1, 12), (2, 6), (3, 10)],
        noise: 0.0,
        silent_ends: false,
    }
}

#[test]
fn ideal_block_embedding_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(dir.path(), "ideal", &[ideal_track()], "emb", 1);
    let manifest = DatasetManifest::load(&path).unwrap();
    let outcome = run_track(&manifest.tracks[0], "emb", &CBM_FULL_RBF, &RunSettings::default());
    let TrackOutcome::Evaluated(eval) = outcome else {
        panic!("track skipped: {outcome:?}");
    };
    for tol in [0.5, 3.0] {
        let s = eval.get(tol, Trimming::None).unwrap();
        assert_eq!((s.precision, s.recall, s.f_measure), (1.0, 1.0, 1.0));
    }
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let tracks = common::five_tracks();
    let path = write_dataset(dir.path(), "d", &tracks, "emb", 2);
    let manifest = DatasetManifest::load(&path).unwrap();
    for config in SweepGrid::default().configs() {
        let a = run_track(&manifest.tracks[1], "emb", &config, &RunSettings::default());
        let b = run_track(&manifest.tracks[1], "emb", &config, &RunSettings::default());
        let (TrackOutcome::Evaluated(a), TrackOutcome::Evaluated(b)) = (a, b) else {
            panic!("unexpected skip");
        };
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn missing_embedding_skips_the_track() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(dir.path(), "d", &[ideal_track()], "emb", 3);
    fs::remove_file(dir.path().join("d/ideal.npy")).unwrap();
    let manifest = DatasetManifest::load(&path).unwrap();
    match run_track(&manifest.tracks[0], "emb", &CBM_FULL_RBF, &RunSettings::default()) {
        TrackOutcome::Skipped { track_id, reason } => {
            assert_eq!(track_id, "ideal");
            assert!(reason.contains("ideal.npy"), "{reason}");
        }
        other => panic!("expected a skip, got {other:?}"),
    }
    // An unknown feature id has no source either.
    let manifest = DatasetManifest::load(&path).unwrap();
    assert!(matches!(
        run_track(&manifest.tracks[0], "other", &CBM_FULL_RBF, &RunSettings::default()),
        TrackOutcome::Skipped { .. }
    ));
}

#[test]
fn frame_level_embeddings_are_pooled_to_bars() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_dataset(dir.path(), "d", &[ideal_track()], "emb", 4);
    // Replace the bar matrix with 4 frames per bar (hop 0.5 s).
    let bars = msa_harness::io::read_matrix(dir.path().join("d/ideal.npy")).unwrap();
    let frames = Array2::from_shape_fn((bars.nrows() * 4, bars.ncols()), |(t, d)| bars[[t / 4, d]]);
    write_npy(dir.path().join("d/ideal.npy"), &frames).unwrap();

    let mut manifest = DatasetManifest::load(&path).unwrap();
    assert!(matches!(
        run_track(&manifest.tracks[0], "emb", &CBM_FULL_RBF, &RunSettings::default()),
        TrackOutcome::Skipped { .. }
    ));
    manifest.tracks[0].frame_hops.insert("emb".into(), 0.5);
    let inputs = load_track(&manifest.tracks[0], "emb", 96).unwrap();
    assert_eq!(inputs.features.values(), &bars);
    let TrackOutcome::Evaluated(eval) =
        run_track(&manifest.tracks[0], "emb", &CBM_FULL_RBF, &RunSettings::default())
    else {
        panic!("pooled track skipped");
    };
    assert_eq!(eval.get(0.5, Trimming::None).unwrap().f_measure, 1.0);
}

#[test]
fn barwise_tf_from_audio() {
    let dir = tempfile::tempdir().unwrap();
    let sr = 8000u32;
    let wav = dir.path().join("a.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sr,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(&wav, spec).unwrap();
    // Four 2-second bars alternating between two tones.
    for i in 0..(8 * sr) {
        let t = f64::from(i) / f64::from(sr);
        let f = if ((t / 2.0) as usize).is_multiple_of(2) { 440.0 } else { 1500.0 };
        writer.write_sample((0.3 * (2.0 * std::f64::consts::PI * f * t).sin() * 32767.0) as i16).unwrap();
    }
    writer.finalize().unwrap();
    fs::write(dir.path().join("a.beats"), "0\n2\n4\n6\n").unwrap();
    fs::write(dir.path().join("a.tsv"), "0\t2\tA\n2\t4\tB\n4\t6\tA\n6\t8\tB\n").unwrap();
    let json = r#"{"dataset": "audio", "tracks": [{"track_id": "a", "audio_path": "a.wav",
        "downbeats_path": "a.beats", "annotation_paths": ["a.tsv"], "duration": 8.0}]}"#;
    fs::write(dir.path().join("m.json"), json).unwrap();
    let manifest = DatasetManifest::load(dir.path().join("m.json")).unwrap();
    let inputs = load_track(&manifest.tracks[0], "barwise_tf", 16).unwrap();
    assert_eq!(inputs.features.n_bars(), 4);
    assert_eq!(inputs.features.dim(), 16 * 80);
    let v = inputs.features.values();
    let dist = |a: usize, b: usize| (&v.row(a) - &v.row(b)).mapv(|x| x * x).sum();
    assert!(dist(0, 2) < dist(0, 1));
}

#[test]
fn sweep_counts_cache_and_skips() {
    let dir = tempfile::tempdir().unwrap();
    let tracks = common::five_tracks();
    let path = write_dataset(dir.path(), "d", &tracks, "emb", 5);
    fs::remove_file(dir.path().join("d/track4.npy")).unwrap();
    let grid = SweepGrid {
        similarities: vec![Similarity::Cosine],
        foote_kernel_sizes: vec![4],
        foote_median_sizes: vec![4, 8],
        lsd_ks: vec![3],
        ..SweepGrid::default()
    };
    let request = SweepRequest {
        datasets: vec![DatasetManifest::load(&path).unwrap()],
        feature_id: "emb".into(),
        configs: grid.configs(),
        settings: RunSettings::default(),
        cache_dir: Some(dir.path().join("cache")),
        jobs: 2,
    };
    let n_configs = request.configs.len();
    assert_eq!(n_configs, 2 + 1 + 2);

    let (first, stats) = sweep(&request).unwrap();
    assert_eq!(first.rows.len(), 4 * n_configs);
    assert_eq!(first.skipped.len(), 1);
    assert_eq!(first.skipped[0].track_id, "track4");
    assert_eq!(stats.hits, 0);
    assert_eq!(stats.misses, 4 * n_configs);

    let (second, stats) = sweep(&request).unwrap();
    assert_eq!(stats.hits, 4 * n_configs);
    assert_eq!(stats.misses, 0);
    assert_eq!(first.to_json(), second.to_json());

    // Changing an input invalidates only that track.
    fs::write(dir.path().join("d/track0.tsv"), "0\t16\tA\n16\t64\tB\n").unwrap();
    let (third, stats) = sweep(&request).unwrap();
    assert_eq!(stats.misses, n_configs);
    assert_eq!(third.rows.len(), first.rows.len());
}
