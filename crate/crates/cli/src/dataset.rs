//! CSV dataset interchange: the only on-disk data format at desk scale.
//!
//! Files are comma-separated numeric columns with an optional header
//! (auto-detected by a non-numeric first row). Values are written with
//! Rust's shortest round-trip float formatting, so write/read cycles are
//! bit-exact and reruns produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use bdsg_core::batch::Batch;
use bdsg_core::density::GaussianMixture;
use bdsg_core::error::{Error, Result};

/// Loads a CSV of d numeric columns; row order preserved.
pub fn load_dataset(path: &Path) -> Result<Batch> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected_dim: Option<usize> = None;
    let mut saw_any_line = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        saw_any_line = true;
        let cells: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(d) = expected_dim {
                    if values.len() != d {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("expected {d} columns, found {}", values.len()),
                        });
                    }
                } else {
                    expected_dim = Some(values.len());
                }
                rows.push(values);
            }
            Err(_) => {
                // a non-numeric first row is a header; anywhere else it is an error
                if rows.is_empty() && expected_dim.is_none() {
                    expected_dim = Some(cells.len());
                } else {
                    let bad = cells
                        .iter()
                        .find(|c| c.parse::<f64>().is_err())
                        .unwrap_or(&"");
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("non-numeric cell {bad:?}"),
                    });
                }
            }
        }
    }
    if !saw_any_line || rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "dataset has no data rows".into(),
        });
    }
    Batch::from_rows(&rows)
}

/// Writes a batch with header x1..xd.
pub fn write_dataset(batch: &Batch, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(batch))?;
    Ok(())
}

pub fn dataset_to_csv(batch: &Batch) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=batch.dim()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in batch.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Draws M i.i.d. points from the mixture and writes them as CSV.
pub fn generate_synthetic(
    mixture: &GaussianMixture,
    m: usize,
    seed: u64,
    path: &Path,
) -> Result<Batch> {
    if m == 0 {
        return Err(Error::config("sample count must be at least 1"));
    }
    let batch = mixture.sample(m, seed);
    write_dataset(&batch, path)?;
    Ok(batch)
}

/// Loss-history CSV with the schema epoch,total,l0,l1,l2.
pub fn loss_history_to_csv(history: &[bdsg_core::boundary::LossBreakdown]) -> String {
    let mut out = String::from("epoch,total,l0,l1,l2\n");
    for h in history {
        let _ = writeln!(out, "{},{},{},{},{}", h.epoch, h.total, h.l0, h.l1, h.l2);
    }
    out
}

/// Scalar history CSV (flow NLL per epoch).
pub fn scalar_history_to_csv(name: &str, values: &[f64]) -> String {
    let mut out = format!("epoch,{name}\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}
