//! Report rows and their CSV/JSON encodings.
//!
//! `RunRow` is the single definition of the output schema: the CSV header
//! order is its field order, and the JSON form is the same struct, so every
//! row round-trips between the two formats losslessly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sampling run: identity columns first, then cost and fidelity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    /// Stepping rule: `ddpm`, `ddim`, or `heun`.
    pub sampler: String,
    pub parallel: bool,
    /// Schedule length (full-grid step count).
    #[serde(rename = "T")]
    pub num_steps: usize,
    /// Window length; 0 for sequential runs.
    pub p: usize,
    /// Convergence tolerance; 0.0 for sequential runs.
    pub tau: f64,
    pub workers: usize,
    pub model_evals: u64,
    /// Engine iterations for parallel runs, chain steps for sequential ones.
    pub parallel_iters: usize,
    /// Median wall time of five runs, or 0.0 when timing is off.
    pub wall_ms: f64,
    /// Euclidean gap to the same-seed sequential endpoint; 0.0 for the
    /// sequential runs themselves.
    pub parity_endpoint: f64,
    /// Semicolon-joined per-iteration strides; empty for sequential runs.
    pub stride_trace: String,
}

/// Efficiency comparison of one parallel row against its sequential
/// baseline row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub seed: u64,
    pub sampler: String,
    #[serde(rename = "T")]
    pub num_steps: usize,
    pub tau: f64,
    pub p: usize,
    /// Parallel model evaluations over sequential ones.
    pub inefficiency: f64,
    /// Parallel iterations over sequential iterations.
    pub iteration_ratio: f64,
    /// Sequential wall time over parallel wall time.
    pub speedup: f64,
}

pub fn join_strides(strides: &[usize]) -> String {
    strides.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn csv_string<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::SchemaMismatch(format!("encoding row: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::SchemaMismatch(format!("flushing rows: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::SchemaMismatch(format!("encoding rows: {e}")))
}

pub fn rows_to_csv(rows: &[RunRow]) -> Result<String> {
    csv_string(rows)
}

pub fn compare_rows_to_csv(rows: &[CompareRow]) -> Result<String> {
    csv_string(rows)
}

/// JSON array form of the same rows, one object per row.
pub fn rows_to_json(rows: &[RunRow]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(rows)
        .map_err(|e| Error::SchemaMismatch(format!("encoding rows: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn rows_from_json(text: &str) -> Result<Vec<RunRow>> {
    serde_json::from_str(text).map_err(|e| Error::SchemaMismatch(format!("decoding rows: {e}")))
}

/// Read rows produced by `run` back from a CSV file.
pub fn read_rows_csv(path: &Path) -> Result<Vec<RunRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))
        })
        .collect()
}

pub fn rows_from_csv(text: &str) -> Result<Vec<RunRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|row| row.map_err(|e| Error::SchemaMismatch(format!("decoding rows: {e}"))))
        .collect()
}
