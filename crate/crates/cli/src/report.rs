//! Report artifacts produced by a run: per-seed JSON, seed-averaged JSON and
//! per-chunk objective-trace CSVs. Reports carry no timing fields, so a
//! repeated run with the same configuration reproduces them byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use i2mufs::Variant;
use serde::{Deserialize, Serialize};

/// Version stamp written into every JSON artifact.
pub const REPORT_SCHEMA: u32 = 1;

/// Clustering quality of one feature-ratio setting for one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureResult {
    pub feature_ratio: f64,
    /// `None` when the dataset ships no ground-truth labels.
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub f_measure: Option<f64>,
    /// Kept features per view, best-ranked first.
    pub selected_indices: Vec<Vec<usize>>,
}

/// Full outcome of one seed's pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedReport {
    pub schema: u32,
    pub variant: Variant,
    pub seed: u64,
    pub n_chunks: usize,
    pub results: Vec<FeatureResult>,
    /// Inner iterations spent on each processed chunk.
    pub iterations: Vec<usize>,
    /// Final view weights after each processed chunk.
    pub alpha_trajectory: Vec<Vec<f64>>,
}

/// Seed-averaged clustering quality for one feature-ratio setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanResult {
    pub feature_ratio: f64,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub f_measure: Option<f64>,
}

/// Arithmetic mean of the per-seed reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanReport {
    pub schema: u32,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub results: Vec<MeanResult>,
    pub iterations: Vec<f64>,
    pub alpha_trajectory: Vec<Vec<f64>>,
}

/// Averages per-seed reports position-wise; a metric averages to `None` if
/// any seed lacks it (labels are a dataset-wide property, so in practice it
/// is all seeds or none).
pub fn mean_report(reports: &[SeedReport]) -> MeanReport {
    let n = reports.len() as f64;
    let first = &reports[0];

    let results = first
        .results
        .iter()
        .enumerate()
        .map(|(i, base)| {
            let pick = |get: fn(&FeatureResult) -> Option<f64>| -> Option<f64> {
                let mut sum = 0.0;
                for r in reports {
                    sum += get(&r.results[i])?;
                }
                Some(sum / n)
            };
            MeanResult {
                feature_ratio: base.feature_ratio,
                nmi: pick(|r| r.nmi),
                ari: pick(|r| r.ari),
                f_measure: pick(|r| r.f_measure),
            }
        })
        .collect();

    let n_positions = first.iterations.len();
    let iterations = (0..n_positions)
        .map(|t| reports.iter().map(|r| r.iterations[t] as f64).sum::<f64>() / n)
        .collect();
    let alpha_trajectory = (0..n_positions)
        .map(|t| {
            let views = first.alpha_trajectory[t].len();
            (0..views)
                .map(|v| {
                    reports
                        .iter()
                        .map(|r| r.alpha_trajectory[t][v])
                        .sum::<f64>()
                        / n
                })
                .collect()
        })
        .collect();

    MeanReport {
        schema: REPORT_SCHEMA,
        variant: first.variant,
        seeds: reports.iter().map(|r| r.seed).collect(),
        results,
        iterations,
        alpha_trajectory,
    }
}

/// Serializes a JSON artifact with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes one chunk's objective trace as `iteration,objective` rows.
pub fn write_trace_csv(path: &Path, trace: &[f64]) -> anyhow::Result<()> {
    let mut body = String::from("iteration,objective\n");
    for (i, value) in trace.iter().enumerate() {
        body.push_str(&format!("{},{value}\n", i + 1));
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn seed_report_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("report_seed{seed}.json"))
}

pub fn mean_report_path(out: &Path) -> PathBuf {
    out.join("report_mean.json")
}

pub fn trace_csv_path(out: &Path, seed: u64, chunk: usize) -> PathBuf {
    out.join(format!("trace_seed{seed}_chunk{chunk}.csv"))
}
