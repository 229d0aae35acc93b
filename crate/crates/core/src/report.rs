//! Report generation: per-iteration (or per-k) bias tables as CSV and a
//! JSON plot-data document. Output is byte-deterministic for a given input.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::write_atomic;
use crate::pipeline::{SelectionRecord, Trajectory};
use crate::stats::{bias_stats, per_iteration_stats, BiasStats, ScorePair};

/// One table row: the iteration index (or k for best-of-k sweeps) plus the
/// bias statistics over the samples at that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub key: u32,
    pub n: usize,
    pub bias: f64,
    pub dskew: f64,
    pub mean_self: f64,
    pub mean_true: f64,
}

impl ReportRow {
    pub fn new(key: u32, stats: BiasStats) -> Self {
        ReportRow {
            key,
            n: stats.n,
            bias: stats.bias,
            dskew: stats.dskew,
            mean_self: stats.mean_self,
            mean_true: stats.mean_true,
        }
    }
}

/// Full report document written as JSON next to the CSV table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub key_column: String,
    pub seed: u64,
    pub config_hash: String,
    pub provider_tags: Vec<String>,
    pub rows: Vec<ReportRow>,
}

/// Per-iteration bias rows over a set of trajectories.
pub fn trajectory_report(trajectories: &[Trajectory]) -> Result<Vec<ReportRow>> {
    Ok(per_iteration_stats(trajectories)?
        .into_iter()
        .map(|(iteration, stats)| ReportRow::new(iteration, stats))
        .collect())
}

/// One row per k value from best-of-k selections, computed over the selected
/// candidates.
pub fn selection_report(selections: &[SelectionRecord], gamma: f64) -> Result<Vec<ReportRow>> {
    let mut ks: Vec<u32> = selections.iter().map(|s| s.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        let pairs: Vec<ScorePair> = selections
            .iter()
            .filter(|s| s.k == k)
            .filter_map(SelectionRecord::selected_pair)
            .collect();
        rows.push(ReportRow::new(k, bias_stats(&pairs, gamma)?));
    }
    Ok(rows)
}

fn format_cell(v: f64) -> String {
    // Shortest round-trip float formatting keeps the CSV byte-deterministic.
    format!("{v}")
}

pub fn render_csv(key_column: &str, rows: &[ReportRow]) -> String {
    let mut out = format!("{key_column},n,bias,dskew,mean_self,mean_true\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.key,
            row.n,
            format_cell(row.bias),
            format_cell(row.dskew),
            format_cell(row.mean_self),
            format_cell(row.mean_true),
        ));
    }
    out
}

pub fn write_csv(path: &Path, key_column: &str, rows: &[ReportRow]) -> Result<()> {
    write_atomic(path, &render_csv(key_column, rows))
}

pub fn write_json(path: &Path, report: &Report) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    write_atomic(path, &text)
}
