//! Segmenter configurations and the hyperparameter sweep grid.

use std::fmt;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use msa_core::cbm::{segment_cbm, CbmKernel, CbmNormalization, CbmParams, DEFAULT_MAX_SIZE};
use msa_core::foote::{segment_foote, FooteParams, DEFAULT_TAPER_SIGMA};
use msa_core::lsd::{segment_lsd, LsdParams, DEFAULT_MU};
use msa_core::ssm::{cosine_ssm, normalize_rows, rbf_ssm};
use msa_core::{BarMatrix, Segmentation, SelfSimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Foote,
    Lsd,
    Cbm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Foote, Algorithm::Lsd, Algorithm::Cbm];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Foote => "foote",
            Algorithm::Lsd => "lsd",
            Algorithm::Cbm => "cbm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Rbf,
    Cosine,
}

impl Similarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Similarity::Rbf => "rbf",
            Similarity::Cosine => "cosine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CbmKernelChoice {
    Full,
    Band7,
}

impl CbmKernelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            CbmKernelChoice::Full => "full",
            CbmKernelChoice::Band7 => "band7",
        }
    }

    fn kernel(self) -> CbmKernel {
        match self {
            CbmKernelChoice::Full => CbmKernel::Full,
            CbmKernelChoice::Band7 => CbmKernel::Band7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CbmNormChoice {
    #[default]
    SegmentLength,
    SqrtKernelOnes,
}

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum SegmenterConfig {
    Foote {
        kernel_size: usize,
        median_size: usize,
        similarity: Similarity,
    },
    Lsd {
        k: usize,
    },
    Cbm {
        kernel: CbmKernelChoice,
        similarity: Similarity,
    },
}

impl SegmenterConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            SegmenterConfig::Foote { .. } => Algorithm::Foote,
            SegmenterConfig::Lsd { .. } => Algorithm::Lsd,
            SegmenterConfig::Cbm { .. } => Algorithm::Cbm,
        }
    }

    /// Stable identifier such as `foote:rbf:k8:m12`, `lsd:k10` or
    /// `cbm:cosine:full`.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SegmenterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmenterConfig::Foote {
                kernel_size,
                median_size,
                similarity,
            } => write!(f, "foote:{}:k{kernel_size}:m{median_size}", similarity.as_str()),
            SegmenterConfig::Lsd { k } => write!(f, "lsd:k{k}"),
            SegmenterConfig::Cbm { kernel, similarity } => {
                write!(f, "cbm:{}:{}", similarity.as_str(), kernel.as_str())
            }
        }
    }
}

/// Settings shared by every configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmenterOptions {
    /// Foote taper width relative to the kernel half-width; `None` = flat.
    pub taper_sigma: Option<f64>,
    pub lsd_mu: f64,
    pub lsd_knn: Option<usize>,
    pub cbm_max_size: usize,
    pub cbm_normalization: CbmNormChoice,
    pub seed: u64,
    /// Scale bar vectors to unit norm before building the SSM.
    pub pre_normalize: bool,
    /// Fixed RBF bandwidth; `None` uses the median heuristic.
    pub rbf_sigma: Option<f64>,
}

impl Default for SegmenterOptions {
    fn default() -> Self {
        Self {
            taper_sigma: Some(DEFAULT_TAPER_SIGMA),
            lsd_mu: DEFAULT_MU,
            lsd_knn: None,
            cbm_max_size: DEFAULT_MAX_SIZE,
            cbm_normalization: CbmNormChoice::SegmentLength,
            seed: 0,
            pre_normalize: false,
            rbf_sigma: None,
        }
    }
}

fn similarity_matrix(
    features: &BarMatrix,
    similarity: Similarity,
    options: &SegmenterOptions,
) -> msa_core::Result<SelfSimilarityMatrix> {
    let normalized;
    let x = if options.pre_normalize {
        normalized = normalize_rows(features);
        &normalized
    } else {
        features
    };
    match similarity {
        Similarity::Rbf => rbf_ssm(x, options.rbf_sigma),
        Similarity::Cosine => Ok(cosine_ssm(x)),
    }
}

/// Runs one configuration on a bar matrix.
pub fn segment(
    features: &BarMatrix,
    config: &SegmenterConfig,
    options: &SegmenterOptions,
) -> msa_core::Result<Segmentation> {
    match *config {
        SegmenterConfig::Foote {
            kernel_size,
            median_size,
            similarity,
        } => {
            let ssm = similarity_matrix(features, similarity, options)?;
            let params = FooteParams {
                taper_sigma: options.taper_sigma,
                ..FooteParams::new(kernel_size, median_size)
            };
            segment_foote(&ssm, &params)
        }
        SegmenterConfig::Lsd { k } => {
            let params = LsdParams {
                knn: options.lsd_knn,
                mu: options.lsd_mu,
                seed: options.seed,
                ..LsdParams::new(k)
            };
            segment_lsd(features, &params)
        }
        SegmenterConfig::Cbm { kernel, similarity } => {
            let ssm = similarity_matrix(features, similarity, options)?;
            let params = CbmParams {
                kernel: kernel.kernel(),
                max_size: options.cbm_max_size,
                normalization: match options.cbm_normalization {
                    CbmNormChoice::SegmentLength => CbmNormalization::SegmentLength,
                    CbmNormChoice::SqrtKernelOnes => CbmNormalization::SqrtKernelOnes,
                },
            };
            segment_cbm(&ssm, &params)
        }
    }
}

pub const DEFAULT_FOOTE_SIZES: [usize; 3] = [8, 12, 16];
pub const DEFAULT_LSD_KS: [usize; 10] = [4, 6, 8, 9, 10, 11, 12, 13, 14, 16];

/// Parameter lists per algorithm. The Cartesian product of the lists is
/// swept; similarity is ignored for LSD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub algorithms: Vec<Algorithm>,
    pub similarities: Vec<Similarity>,
    pub foote_kernel_sizes: Vec<usize>,
    pub foote_median_sizes: Vec<usize>,
    pub lsd_ks: Vec<usize>,
    pub cbm_kernels: Vec<CbmKernelChoice>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            similarities: vec![Similarity::Rbf, Similarity::Cosine],
            foote_kernel_sizes: DEFAULT_FOOTE_SIZES.to_vec(),
            foote_median_sizes: DEFAULT_FOOTE_SIZES.to_vec(),
            lsd_ks: DEFAULT_LSD_KS.to_vec(),
            cbm_kernels: vec![CbmKernelChoice::Full, CbmKernelChoice::Band7],
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), String> {
        let empty = [
            ("algorithms", self.algorithms.is_empty()),
            ("similarities", self.similarities.is_empty() && self.needs_similarity()),
            ("foote kernel sizes", self.uses(Algorithm::Foote) && self.foote_kernel_sizes.is_empty()),
            ("foote median sizes", self.uses(Algorithm::Foote) && self.foote_median_sizes.is_empty()),
            ("lsd k values", self.uses(Algorithm::Lsd) && self.lsd_ks.is_empty()),
            ("cbm kernels", self.uses(Algorithm::Cbm) && self.cbm_kernels.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(format!("sweep grid has no {name}"));
        }
        let zero = self.foote_kernel_sizes.iter().chain(&self.foote_median_sizes).chain(&self.lsd_ks);
        if zero.into_iter().any(|&v| v == 0) {
            return Err("grid sizes must be positive".into());
        }
        Ok(())
    }

    fn uses(&self, algorithm: Algorithm) -> bool {
        self.algorithms.contains(&algorithm)
    }

    fn needs_similarity(&self) -> bool {
        self.uses(Algorithm::Foote) || self.uses(Algorithm::Cbm)
    }

    /// All configurations, sorted and deduplicated.
    pub fn configs(&self) -> Vec<SegmenterConfig> {
        let mut out = Vec::new();
        if self.uses(Algorithm::Foote) {
            for &similarity in &self.similarities {
                for &kernel_size in &self.foote_kernel_sizes {
                    for &median_size in &self.foote_median_sizes {
                        out.push(SegmenterConfig::Foote {
                            kernel_size,
                            median_size,
                            similarity,
                        });
                    }
                }
            }
        }
        if self.uses(Algorithm::Lsd) {
            out.extend(self.lsd_ks.iter().map(|&k| SegmenterConfig::Lsd { k }));
        }
        if self.uses(Algorithm::Cbm) {
            for &similarity in &self.similarities {
                for &kernel in &self.cbm_kernels {
                    out.push(SegmenterConfig::Cbm { kernel, similarity });
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(grid: &SweepGrid, algorithm: Algorithm) -> usize {
        grid.configs().iter().filter(|c| c.algorithm() == algorithm).count()
    }

    #[test]
    fn default_grid_shape() {
        let grid = SweepGrid::default();
        assert_eq!(count(&grid, Algorithm::Foote), 18);
        assert_eq!(count(&grid, Algorithm::Lsd), 10);
        assert_eq!(count(&grid, Algorithm::Cbm), 4);
        let one_sim = SweepGrid {
            similarities: vec![Similarity::Rbf],
            ..SweepGrid::default()
        };
        assert_eq!(count(&one_sim, Algorithm::Cbm), 2);
        assert_eq!(count(&one_sim, Algorithm::Lsd), 10);
    }

    #[test]
    fn ids_are_stable() {
        let foote = SegmenterConfig::Foote {
            kernel_size: 8,
            median_size: 12,
            similarity: Similarity::Rbf,
        };
        assert_eq!(foote.id(), "foote:rbf:k8:m12");
        assert_eq!(SegmenterConfig::Lsd { k: 10 }.id(), "lsd:k10");
        let cbm = SegmenterConfig::Cbm {
            kernel: CbmKernelChoice::Full,
            similarity: Similarity::Cosine,
        };
        assert_eq!(cbm.id(), "cbm:cosine:full");
        let json = serde_json::to_string(&cbm).unwrap();
        assert_eq!(json, r#"{"algorithm":"cbm","kernel":"full","similarity":"cosine"}"#);
        assert_eq!(serde_json::from_str::<SegmenterConfig>(&json).unwrap(), cbm);
    }

    #[test]
    fn empty_lists_rejected() {
        let grid = SweepGrid {
            lsd_ks: vec![],
            ..SweepGrid::default()
        };
        assert!(grid.validate().is_err());
        let lsd_only = SweepGrid {
            algorithms: vec![Algorithm::Lsd],
            similarities: vec![],
            ..SweepGrid::default()
        };
        assert!(lsd_only.validate().is_ok());
        assert_eq!(lsd_only.configs().len(), 10);
    }
}
