//! Unsupervised music structure boundary detection at the bar scale.
//!
//! The pipeline turns one feature vector per bar into a self-similarity
//! matrix, segments it with one of three algorithms and scores the result
//! against reference annotations:
//!
//! ```text
//! downbeats -> BarGrid -> BarMatrix -> SSM -> {Foote, LSD, CBM} -> boundaries -> hit-rate F
//! ```
//!
//! * [`types`]: bar grids, feature matrices, SSMs, segmentations, annotations
//! * [`features`]: WAV decoding, log-mel spectrogram, Barwise TF matrix, bar pooling
//! * [`ssm`]: cosine and RBF self-similarity
//! * [`foote`]: checkerboard-kernel novelty and peak picking
//! * [`lsd`]: spectral clustering of a stripe-emphasizing affinity
//! * [`cbm`]: Correlation Block-Matching dynamic program
//! * [`eval`]: boundary matching, trimming and best-of-annotations scoring

pub mod cbm;
pub mod error;
pub mod eval;
pub mod features;
pub mod foote;
pub mod lsd;
pub mod ssm;
pub mod types;

mod stats;

pub use error::{MsaError, Result};
pub use types::{
    bars_from_downbeats, boundaries_to_seconds, Annotation, AnnotatedSegment, BarGrid, BarMatrix,
    Segmentation, SelfSimilarityMatrix, SimilarityKind,
};
