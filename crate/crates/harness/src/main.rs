use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use msa_core::bars_from_downbeats;
use msa_core::eval::{evaluate_track, EvalOptions, Trimming, DEFAULT_SILENCE_LABELS};
use msa_core::features::DEFAULT_FRAMES_PER_BAR;
use msa_core::BarMatrix;
use msa_harness::config::{
    segment, Algorithm, CbmKernelChoice, CbmNormChoice, SegmenterConfig, SegmenterOptions, Similarity, SweepGrid,
    DEFAULT_FOOTE_SIZES, DEFAULT_LSD_KS,
};
use msa_harness::io::{read_annotation, read_matrix, read_times, write_npy, write_times};
use msa_harness::manifest::DatasetManifest;
use msa_harness::pipeline::{barwise_tf_from_audio, RunSettings, BARWISE_TF};
use msa_harness::report::{
    emit_report, render_distribution_csv, report_from_results, ReportFormat, SelectionMode, SelectionPolicy,
};
use msa_harness::sweep::{sweep, SweepRequest, SweepResults};

#[derive(Parser)]
#[command(name = "msa", version, about = "Unsupervised music structure boundary detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audio + downbeats → Barwise TF matrix (NPY).
    Features(FeaturesArgs),
    /// Bar matrix + downbeats → boundary file.
    Segment(SegmentArgs),
    /// Boundaries + annotations → scores (JSON on stdout).
    Eval(EvalArgs),
    /// Hyperparameter sweep over dataset manifests.
    Sweep(Box<SweepArgs>),
    /// Select configurations from sweep results and write a report.
    Report(ReportArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    audio: PathBuf,
    #[arg(long)]
    downbeats: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FRAMES_PER_BAR)]
    frames_per_bar: usize,
}

fn parse_trim(s: &str) -> Result<Trimming, String> {
    match s {
        "none" => Ok(Trimming::None),
        "trim" => Ok(Trimming::Trim),
        "double" | "double_trim" => Ok(Trimming::DoubleTrim),
        _ => Err(format!("expected none, trim or double, got {s:?}")),
    }
}

#[derive(Args)]
struct EvalFlags {
    /// Trimming modes to score.
    #[arg(long = "trim", value_parser = parse_trim, value_delimiter = ',', default_values = ["none", "trim", "double"])]
    trimmings: Vec<Trimming>,
    /// Labels marking silent extremity segments (case-insensitive).
    #[arg(long, value_delimiter = ',', default_values = DEFAULT_SILENCE_LABELS)]
    silence_labels: Vec<String>,
    /// Boundaries dropped at each end when trimming.
    #[arg(long, default_value_t = 1)]
    trim_segments: usize,
}

impl EvalFlags {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            silence_labels: self.silence_labels.clone(),
            trim_per_end: self.trim_segments,
        }
    }
}

#[derive(Args)]
struct SegmenterFlags {
    /// Gaussian taper of the Foote kernel relative to its half-width; 0 disables it.
    #[arg(long, default_value_t = 0.5)]
    taper: f64,
    #[arg(long, default_value_t = msa_core::lsd::DEFAULT_MU)]
    mu: f64,
    /// Recurrence neighbours for LSD (default: 1 + 2·log2 B).
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long, default_value_t = msa_core::cbm::DEFAULT_MAX_SIZE)]
    max_size: usize,
    #[arg(long, value_enum, default_value_t = CbmNormChoice::SegmentLength)]
    cbm_normalization: CbmNormChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale bar vectors to unit norm before building SSMs.
    #[arg(long)]
    pre_normalize: bool,
    /// Fixed RBF bandwidth instead of the median heuristic.
    #[arg(long)]
    rbf_sigma: Option<f64>,
}

impl SegmenterFlags {
    fn options(&self) -> SegmenterOptions {
        SegmenterOptions {
            taper_sigma: (self.taper > 0.0).then_some(self.taper),
            lsd_mu: self.mu,
            lsd_knn: self.knn,
            cbm_max_size: self.max_size,
            cbm_normalization: self.cbm_normalization,
            seed: self.seed,
            pre_normalize: self.pre_normalize,
            rbf_sigma: self.rbf_sigma,
        }
    }
}

#[derive(Args)]
struct SegmentArgs {
    /// Bar-level matrix (NPY or CSV), one row per bar.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    downbeats: PathBuf,
    /// Track duration in seconds.
    #[arg(long)]
    duration: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    #[arg(long, value_enum, default_value_t = Similarity::Rbf)]
    similarity: Similarity,
    #[arg(long, default_value_t = 12)]
    kernel_size: usize,
    #[arg(long, default_value_t = 12)]
    median_size: usize,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, value_enum, default_value_t = CbmKernelChoice::Full)]
    cbm_kernel: CbmKernelChoice,
    #[command(flatten)]
    segmenter: SegmenterFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    boundaries: PathBuf,
    /// Reference annotation; repeat for several annotators.
    #[arg(long = "annotation", required = true)]
    annotations: Vec<PathBuf>,
    #[arg(long, default_value = "track")]
    track_id: String,
    #[command(flatten)]
    eval: EvalFlags,
}

#[derive(Args)]
struct SweepArgs {
    /// Dataset manifest; repeat for several datasets.
    #[arg(long = "manifest", required = true)]
    manifests: Vec<PathBuf>,
    #[arg(long, default_value = BARWISE_TF)]
    feature: String,
    #[arg(long = "algorithm", value_enum, value_delimiter = ',', default_values = ["foote", "lsd", "cbm"])]
    algorithms: Vec<Algorithm>,
    #[arg(long = "similarity", value_enum, value_delimiter = ',', default_values = ["rbf", "cosine"])]
    similarities: Vec<Similarity>,
    #[arg(long = "kernel-size", value_delimiter = ',', default_values_t = DEFAULT_FOOTE_SIZES)]
    kernel_sizes: Vec<usize>,
    #[arg(long = "median-size", value_delimiter = ',', default_values_t = DEFAULT_FOOTE_SIZES)]
    median_sizes: Vec<usize>,
    #[arg(long = "k", value_delimiter = ',', default_values_t = DEFAULT_LSD_KS)]
    ks: Vec<usize>,
    #[arg(long = "cbm-kernel", value_enum, value_delimiter = ',', default_values = ["full", "band7"])]
    cbm_kernels: Vec<CbmKernelChoice>,
    #[arg(long, default_value_t = DEFAULT_FRAMES_PER_BAR)]
    frames_per_bar: usize,
    #[command(flatten)]
    segmenter: SegmenterFlags,
    #[command(flatten)]
    eval: EvalFlags,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Results table (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Also write a report with the given policy and format.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    report_flags: ReportFlags,
}

#[derive(Args)]
struct ReportFlags {
    #[arg(long, value_enum, default_value_t = SelectionMode::PerModelAcrossDatasets)]
    policy: SelectionMode,
    /// Trimming mode used to rank configurations.
    #[arg(long, value_parser = parse_trim, default_value = "none")]
    selection_trim: Trimming,
    #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
    format: ReportFormat,
    /// Per-configuration score distribution (CSV).
    #[arg(long)]
    distribution: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results table written by `sweep`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    report_flags: ReportFlags,
}

fn write_report(results: &SweepResults, flags: &ReportFlags, out: &PathBuf) -> anyhow::Result<()> {
    let policy = SelectionPolicy {
        mode: flags.policy,
        trimming: flags.selection_trim,
    };
    let report = report_from_results(results, &policy)?;
    emit_report(&report, flags.format, out)?;
    if let Some(path) = &flags.distribution {
        msa_harness::io::write_atomic(path, render_distribution_csv(&report).as_bytes())?;
    }
    Ok(())
}

fn run_features(args: &FeaturesArgs) -> anyhow::Result<ExitCode> {
    let audio = msa_core::features::decode_audio(&args.audio)?;
    let downbeats = read_times(&args.downbeats)?;
    let grid = bars_from_downbeats(&downbeats, audio.duration())?;
    let matrix = barwise_tf_from_audio(&args.audio, &grid, args.frames_per_bar)?;
    write_npy(&args.out, matrix.values())?;
    log::info!("{} bars × {} dims → {}", matrix.n_bars(), matrix.dim(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_segment(args: &SegmentArgs) -> anyhow::Result<ExitCode> {
    let downbeats = read_times(&args.downbeats)?;
    let grid = bars_from_downbeats(&downbeats, args.duration)?;
    let matrix = read_matrix(&args.features)?;
    if matrix.nrows() != grid.n_bars() {
        bail!("{} has {} rows but the downbeats give {} bars", args.features.display(), matrix.nrows(), grid.n_bars());
    }
    let features = BarMatrix::new(matrix, "input")?;
    let config = match args.algorithm {
        Algorithm::Foote => SegmenterConfig::Foote {
            kernel_size: args.kernel_size,
            median_size: args.median_size,
            similarity: args.similarity,
        },
        Algorithm::Lsd => SegmenterConfig::Lsd { k: args.k },
        Algorithm::Cbm => SegmenterConfig::Cbm {
            kernel: args.cbm_kernel,
            similarity: args.similarity,
        },
    };
    let seconds = segment(&features, &config, &args.segmenter.options())?.to_seconds(&grid)?;
    write_times(&args.out, &seconds)?;
    Ok(ExitCode::SUCCESS)
}

fn run_eval(args: &EvalArgs) -> anyhow::Result<ExitCode> {
    let estimate = read_times(&args.boundaries)?;
    let references = args
        .annotations
        .iter()
        .map(read_annotation)
        .collect::<Result<Vec<_>, _>>()?;
    let eval = evaluate_track(&args.track_id, &references, &estimate, &args.eval.trimmings, &args.eval.options())?;
    println!("{}", serde_json::to_string_pretty(&eval)?);
    Ok(ExitCode::SUCCESS)
}

fn run_sweep(args: &SweepArgs) -> anyhow::Result<ExitCode> {
    let datasets = args
        .manifests
        .iter()
        .map(DatasetManifest::load)
        .collect::<Result<Vec<_>, _>>()?;
    let grid = SweepGrid {
        algorithms: args.algorithms.clone(),
        similarities: args.similarities.clone(),
        foote_kernel_sizes: args.kernel_sizes.clone(),
        foote_median_sizes: args.median_sizes.clone(),
        lsd_ks: args.ks.clone(),
        cbm_kernels: args.cbm_kernels.clone(),
    };
    grid.validate().map_err(anyhow::Error::msg)?;
    let request = SweepRequest {
        datasets,
        feature_id: args.feature.clone(),
        configs: grid.configs(),
        settings: RunSettings {
            segmenter: args.segmenter.options(),
            eval: args.eval.options(),
            trimmings: args.eval.trimmings.clone(),
            frames_per_bar: args.frames_per_bar,
        },
        cache_dir: args.cache_dir.clone(),
        jobs: args.jobs,
    };
    let (results, stats) = sweep(&request)?;
    results.save(&args.out)?;
    log::info!(
        "{} result rows, {} skipped, cache {} hit / {} miss",
        results.rows.len(),
        results.skipped.len(),
        stats.hits,
        stats.misses
    );
    eprintln!("cache hits: {} / {}", stats.hits, stats.hits + stats.misses);
    if let Some(path) = &args.report {
        if results.rows.is_empty() {
            bail!("every track was skipped; no report written");
        }
        write_report(&results, &args.report_flags, path)?;
    }
    Ok(exit_for(&results))
}

fn exit_for(results: &SweepResults) -> ExitCode {
    if results.skipped.is_empty() {
        ExitCode::SUCCESS
    } else {
        for s in &results.skipped {
            eprintln!("skipped {}/{}: {}", s.dataset, s.track_id, s.reason);
        }
        ExitCode::from(2)
    }
}

fn run_report(args: &ReportArgs) -> anyhow::Result<ExitCode> {
    let results = SweepResults::load(&args.results)?;
    write_report(&results, &args.report_flags, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(exit_for(&results))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Features(a) => run_features(a),
        Command::Segment(a) => run_segment(a),
        Command::Eval(a) => run_eval(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
