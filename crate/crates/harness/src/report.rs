//! Hyperparameter selection, aggregation and report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use msa_core::eval::{Trimming, TOLERANCES};

use crate::config::Algorithm;
use crate::error::{HarnessError, Result};
use crate::io::write_atomic;
use crate::sweep::{ResultRow, SweepResults};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Best configuration for each (model, dataset) pair.
    PerModelPerDataset,
    /// One configuration per model, best on average over datasets.
    PerModelAcrossDatasets,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::PerModelPerDataset => "per_model_per_dataset",
            SelectionMode::PerModelAcrossDatasets => "per_model_across_datasets",
        }
    }
}

/// The objective is fixed: the mean of dataset-level F0.5 and F3, measured
/// under `trimming`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub mode: SelectionMode,
    pub trimming: Trimming,
}

impl SelectionPolicy {
    pub fn new(mode: SelectionMode) -> Self {
        Self {
            mode,
            trimming: Trimming::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub algorithm: Algorithm,
    pub dataset: String,
    pub trimming: Trimming,
    pub config_id: String,
    pub n_tracks: usize,
    pub f05: Summary,
    pub f3: Summary,
    pub p05: Summary,
    pub r05: Summary,
    pub p3: Summary,
    pub r3: Summary,
}

/// Dataset-level means of one configuration, for robustness plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub model: String,
    pub algorithm: Algorithm,
    pub dataset: String,
    pub trimming: Trimming,
    pub config_id: String,
    pub n_tracks: usize,
    pub f05: f64,
    pub f3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportNotes {
    pub selection_mode: SelectionMode,
    pub selection_trimming: Trimming,
    pub objective: String,
    pub std: String,
    pub tolerances: Vec<f64>,
    pub conventions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub notes: ReportNotes,
    pub rows: Vec<ReportRow>,
    pub distribution: Vec<DistributionRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

type ModelKey = (String, Algorithm);
/// config id → dataset → rows
type ConfigTable<'a> = BTreeMap<String, BTreeMap<String, Vec<&'a ResultRow>>>;

fn cell(row: &ResultRow, tolerance: f64, trimming: Trimming) -> Option<(f64, f64, f64)> {
    row.scores
        .iter()
        .find(|c| c.score.tolerance == tolerance && c.score.trimming == trimming)
        .map(|c| (c.score.precision, c.score.recall, c.score.f_measure))
}

fn metric(rows: &[&ResultRow], tolerance: f64, trimming: Trimming, pick: fn((f64, f64, f64)) -> f64) -> Vec<f64> {
    rows.iter().filter_map(|r| cell(r, tolerance, trimming)).map(pick).collect()
}

fn f_of(v: (f64, f64, f64)) -> f64 {
    v.2
}

/// Dataset-level (F0.5 + F3) / 2, or `None` when the trimming is absent.
fn objective(rows: &[&ResultRow], trimming: Trimming) -> Option<f64> {
    let f05 = metric(rows, TOLERANCES[0], trimming, f_of);
    let f3 = metric(rows, TOLERANCES[1], trimming, f_of);
    if f05.is_empty() || f3.is_empty() {
        return None;
    }
    Some(0.5 * (Summary::of(&f05).mean + Summary::of(&f3).mean))
}

/// First configuration (in id order) with the strictly highest score.
fn argmax<'k>(scores: impl Iterator<Item = (&'k String, f64)>) -> Option<&'k String> {
    let mut best: Option<(&String, f64)> = None;
    for (id, score) in scores {
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((id, score));
        }
    }
    best.map(|(id, _)| id)
}

fn select<'t>(table: &'t ConfigTable, dataset: &str, policy: &SelectionPolicy) -> Option<&'t String> {
    match policy.mode {
        SelectionMode::PerModelPerDataset => argmax(table.iter().filter_map(|(id, by_dataset)| {
            objective(by_dataset.get(dataset)?, policy.trimming).map(|o| (id, o))
        })),
        SelectionMode::PerModelAcrossDatasets => argmax(table.iter().filter_map(|(id, by_dataset)| {
            let per_dataset: Vec<f64> = by_dataset
                .values()
                .filter_map(|rows| objective(rows, policy.trimming))
                .collect();
            (!per_dataset.is_empty()).then(|| (id, Summary::of(&per_dataset).mean))
        })),
    }
}

fn trimmings_present(rows: &[&ResultRow]) -> Vec<Trimming> {
    let mut t: Vec<Trimming> = rows.iter().flat_map(|r| r.scores.iter().map(|c| c.score.trimming)).collect();
    t.sort();
    t.dedup();
    t
}

fn summary_row(key: &ModelKey, dataset: &str, config_id: &str, trimming: Trimming, rows: &[&ResultRow]) -> ReportRow {
    let s = |tol: f64, pick: fn((f64, f64, f64)) -> f64| Summary::of(&metric(rows, tol, trimming, pick));
    let (lo, hi) = (TOLERANCES[0], TOLERANCES[1]);
    ReportRow {
        model: key.0.clone(),
        algorithm: key.1,
        dataset: dataset.to_string(),
        trimming,
        config_id: config_id.to_string(),
        n_tracks: rows.iter().filter(|r| cell(r, lo, trimming).is_some()).count(),
        f05: s(lo, f_of),
        f3: s(hi, f_of),
        p05: s(lo, |v| v.0),
        r05: s(lo, |v| v.1),
        p3: s(hi, |v| v.0),
        r3: s(hi, |v| v.1),
    }
}

/// Picks configurations per the policy and summarizes them per dataset and
/// trimming mode. Every configuration also gets a distribution row.
pub fn select_and_aggregate(results: &[ResultRow], policy: &SelectionPolicy) -> Result<Report> {
    if results.is_empty() {
        return Err(HarnessError::Invalid("no results to aggregate".into()));
    }
    let mut grouped: BTreeMap<ModelKey, ConfigTable> = BTreeMap::new();
    for row in results {
        grouped
            .entry((row.feature_id.clone(), row.algorithm))
            .or_default()
            .entry(row.config_id.clone())
            .or_default()
            .entry(row.dataset.clone())
            .or_default()
            .push(row);
    }
    // Fixed summation order, whatever the input order.
    for table in grouped.values_mut() {
        for track_rows in table.values_mut().flat_map(|d| d.values_mut()) {
            track_rows.sort_by(|a, b| a.track_id.cmp(&b.track_id));
        }
    }

    let mut rows = Vec::new();
    let mut distribution = Vec::new();
    for (key, table) in &grouped {
        let mut datasets: Vec<&String> = table.values().flat_map(|d| d.keys()).collect();
        datasets.sort();
        datasets.dedup();
        for dataset in datasets {
            let Some(config_id) = select(table, dataset, policy) else {
                log::warn!("{}/{}: no configuration scored on {dataset}", key.0, key.1.as_str());
                continue;
            };
            let Some(selected) = table[config_id].get(dataset.as_str()) else {
                continue;
            };
            for trimming in trimmings_present(selected) {
                rows.push(summary_row(key, dataset, config_id, trimming, selected));
            }
        }
        for (config_id, by_dataset) in table {
            for (dataset, track_rows) in by_dataset {
                for trimming in trimmings_present(track_rows) {
                    let f05 = metric(track_rows, TOLERANCES[0], trimming, f_of);
                    let f3 = metric(track_rows, TOLERANCES[1], trimming, f_of);
                    distribution.push(DistributionRow {
                        model: key.0.clone(),
                        algorithm: key.1,
                        dataset: dataset.clone(),
                        trimming,
                        config_id: config_id.clone(),
                        n_tracks: f05.len(),
                        f05: Summary::of(&f05).mean,
                        f3: Summary::of(&f3).mean,
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.model, a.algorithm, &a.dataset, a.trimming).cmp(&(&b.model, b.algorithm, &b.dataset, b.trimming))
    });

    Ok(Report {
        notes: ReportNotes {
            selection_mode: policy.mode,
            selection_trimming: policy.trimming,
            objective: "mean of dataset-level F0.5 and F3".into(),
            std: "population".into(),
            tolerances: TOLERANCES.to_vec(),
            conventions: vec![
                "best reference annotation chosen independently per (tolerance, trimming) cell".into(),
                "Foote kernel size is the half-width M of a 2M x 2M kernel".into(),
                "barwise_tf is built from a log-mel spectrogram (80 bands)".into(),
                "LSD affinity: mutual kNN recurrence plus local path links on bar features".into(),
            ],
        },
        rows,
        distribution,
    })
}

/// Convenience wrapper over a loaded results file.
pub fn report_from_results(results: &SweepResults, policy: &SelectionPolicy) -> Result<Report> {
    select_and_aggregate(&results.rows, policy)
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const CSV_COLUMNS: [&str; 18] = [
    "model", "algorithm", "dataset", "trimming", "config", "n_tracks", "f05_mean", "f05_std", "f3_mean", "f3_std",
    "p05_mean", "p05_std", "r05_mean", "r05_std", "p3_mean", "p3_std", "r3_mean", "r3_std",
];

pub fn render_csv(report: &Report) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in &report.rows {
        let mut fields = vec![
            csv_field(&r.model),
            r.algorithm.as_str().to_string(),
            csv_field(&r.dataset),
            r.trimming.as_str().to_string(),
            csv_field(&r.config_id),
            r.n_tracks.to_string(),
        ];
        for s in [r.f05, r.f3, r.p05, r.r05, r.p3, r.r3] {
            fields.push(pct(s.mean));
            fields.push(pct(s.std));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Distribution rows as CSV, percentages with 2 decimals.
pub fn render_distribution_csv(report: &Report) -> String {
    let mut out = String::from("model,algorithm,dataset,trimming,config,n_tracks,f05,f3\n");
    for d in &report.distribution {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&d.model),
            d.algorithm.as_str(),
            csv_field(&d.dataset),
            d.trimming.as_str(),
            csv_field(&d.config_id),
            d.n_tracks,
            pct(d.f05),
            pct(d.f3)
        );
    }
    out
}

pub fn render_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn render_markdown(report: &Report) -> String {
    let notes = &report.notes;
    let mut out = String::from("# Boundary detection results\n\n");
    let _ = writeln!(out, "- selection: {} (trimming: {})", notes.selection_mode.as_str(), notes.selection_trimming.as_str());
    let _ = writeln!(out, "- objective: {}", notes.objective);
    let _ = writeln!(out, "- values: mean ± {} standard deviation over tracks, in percent", notes.std);
    for c in &notes.conventions {
        let _ = writeln!(out, "- {c}");
    }
    for trimming in Trimming::ALL {
        let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.trimming == trimming).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "\n## Trimming: {}\n", trimming.as_str());
        out.push_str("| Model | Algorithm | Dataset | Config | Tracks | F0.5 | F3 |\n");
        out.push_str("|---|---|---|---|---:|---:|---:|\n");
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} ± {} | {} ± {} |",
                r.model,
                r.algorithm.as_str(),
                r.dataset,
                r.config_id,
                r.n_tracks,
                pct(r.f05.mean),
                pct(r.f05.std),
                pct(r.f3.mean),
                pct(r.f3.std)
            );
        }
    }
    out
}

pub fn render(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => render_json(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

pub fn emit_report(report: &Report, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), render(report, format).as_bytes())
}
