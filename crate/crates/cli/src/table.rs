//! Benchmark result tables: CSV and JSON emission with a deterministic
//! row order.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub n: usize,
    pub alpha: f64,
    pub levels: usize,
    pub mean_cycles: f64,
    /// Sample standard deviation (N-1 denominator); 0 for a single RHS.
    pub std_cycles: f64,
    pub mean_seconds: f64,
}

/// Sort rows by (method, n, alpha descending) so output files are
/// byte-identical across runs.
pub fn sort_rows(rows: &mut [BenchRow]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.n.cmp(&b.n))
            .then(b.alpha.partial_cmp(&a.alpha).expect("finite alpha"))
    });
}

pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() < 2 {
        0.0
    } else {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

pub fn write_csv(path: &Path, rows: &[BenchRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| CliError::config(format!("csv: {e}")))
}

#[cfg_attr(not(test), allow(dead_code))]
pub fn read_csv(path: &Path) -> Result<Vec<BenchRow>, CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::config(format!("csv: {e}"))))
        .collect()
}

pub fn write_json(path: &Path, rows: &[BenchRow]) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(rows)
        .map_err(|e| CliError::config(format!("json: {e}")))?;
    std::fs::write(path, text)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// Emit both formats into `dir` as `bench.csv` / `bench.json`.
pub fn emit_table(dir: &Path, rows: &[BenchRow]) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::config("no benchmark results to emit"));
    }
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    write_csv(&dir.join("bench.csv"), &sorted)?;
    write_json(&dir.join("bench.json"), &sorted)
}
