//! CSV and JSON artifacts.
//!
//! Matrices are plain comma-separated numbers, one row per line, no header.
//! Floats are written in Rust's shortest round-trip form so a write-read
//! cycle reproduces every bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use bloc_core::corrspace::{validate_corr, CorrelationMatrix};
use bloc_core::estimate::DataMatrix;
use bloc_core::metrics::Support;
use bloc_core::penalty::PenaltyMask;
use bloc_core::rmps::TraceEntry;
use nalgebra::DMatrix;
use serde::Serialize;

/// Tolerance used when reading a correlation matrix back from text.
pub const CORR_READ_TOL: f64 = 1e-9;

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn parse_field(field: &str, path: &Path, line: u64, col: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        anyhow::anyhow!(
            "{}: line {line}, column {}: {field:?} is not a number",
            path.display(),
            col + 1
        )
    })
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec.with_context(|| format!("malformed CSV in {}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| parse_field(f, path, line, c))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!(
                    "{}: line {line} has {} fields, expected {}",
                    path.display(),
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} contains no rows", path.display());
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_row_iterator(r, c, rows.into_iter().flatten()))
}

pub fn read_corr(path: &Path) -> Result<CorrelationMatrix> {
    let m = read_matrix(path)?;
    validate_corr(&m, CORR_READ_TOL)
        .with_context(|| format!("{} is not a valid correlation matrix", path.display()))
}

pub fn read_mask(path: &Path) -> Result<PenaltyMask> {
    let m = read_matrix(path)?;
    PenaltyMask::new(m).with_context(|| format!("{} is not a valid penalty mask", path.display()))
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || matches!(field.to_ascii_lowercase().as_str(), "na" | "nan" | "null")
}

/// Data matrix with an optional header row, plus the number of rows
/// dropped for missing values.
pub fn read_data(path: &Path) -> Result<(DataMatrix, usize)> {
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut dropped = 0;
    for (k, rec) in reader(path)?.records().enumerate() {
        let rec = rec.with_context(|| format!("malformed CSV in {}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if let Some(w) = width {
            if rec.len() != w {
                bail!("{}: line {line} has {} fields, expected {w}", path.display(), rec.len());
            }
        }
        width = Some(rec.len());
        if k == 0 && rec.iter().any(|f| !is_missing(f) && f.parse::<f64>().is_err()) {
            names = Some(rec.iter().map(str::to_owned).collect());
            continue;
        }
        if rec.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| parse_field(f, path, line, c))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} contains no complete observations", path.display());
    }
    let (n, d) = (rows.len(), rows[0].len());
    let mut data = DataMatrix::new(DMatrix::from_row_iterator(n, d, rows.into_iter().flatten()))?;
    if let Some(names) = names {
        data = data.with_names(names)?;
    }
    Ok((data, dropped))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn join<T: ToString>(row: impl IntoIterator<Item = T>) -> String {
    row.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    for row in m.row_iter() {
        writeln!(w, "{}", join(row.iter()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_support(path: &Path, s: &Support) -> Result<()> {
    let mut w = create(path)?;
    let d = s.dim();
    for i in 0..d {
        writeln!(w, "{}", join((0..d).map(|j| u8::from(i != j && s.contains(i, j)))))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for x in v {
        writeln!(w, "{x}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 && m.nrows() != 1 {
        bail!("{} must hold a single row or column", path.display());
    }
    Ok(m.transpose().iter().copied().collect())
}

pub fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "run,iteration,step_size,best_value,evaluations")?;
    for e in trace {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.run, e.iteration, e.step_size, e.best_value, e.evaluations
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Header plus rows of already formatted fields.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
