//! Matrix file formats.
//!
//! * CSV: `d` rows of `d` comma-separated decimals, no header.
//! * JSON: `{ "dim": d, "entries": [[...], ...] }`.
//!
//! Values are written in shortest round-trip form, so a write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::support::Edge;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEnvelope {
    pub dim: usize,
    pub entries: Vec<Vec<f64>>,
}

impl From<&SymMatrix> for MatrixEnvelope {
    fn from(m: &SymMatrix) -> Self {
        MatrixEnvelope {
            dim: m.dim(),
            entries: m.to_rows(),
        }
    }
}

impl From<SymMatrix> for MatrixEnvelope {
    fn from(m: SymMatrix) -> Self {
        MatrixEnvelope::from(&m)
    }
}

impl TryFrom<MatrixEnvelope> for SymMatrix {
    type Error = Error;

    fn try_from(env: MatrixEnvelope) -> Result<Self> {
        if env.entries.len() != env.dim {
            return Err(Error::DimensionMismatch {
                expected: env.dim,
                found: env.entries.len(),
            });
        }
        SymMatrix::from_rows(&env.entries)
    }
}

fn format_rows<'a>(rows: impl Iterator<Item = Vec<f64>> + 'a) -> String {
    let mut out = String::new();
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn matrix_to_csv(m: &SymMatrix) -> String {
    format_rows(m.to_rows().into_iter())
}

pub fn matrix_to_json(m: &SymMatrix) -> Result<String> {
    Ok(serde_json::to_string(&MatrixEnvelope::from(m))?)
}

pub fn write_matrix_csv(path: &Path, m: &SymMatrix) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn write_matrix_json(path: &Path, m: &SymMatrix) -> Result<()> {
    fs::write(path, matrix_to_json(m)?)?;
    Ok(())
}

/// Parses rows of comma-separated decimals; blank lines are ignored.
pub fn parse_csv_rows(text: &str, origin: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| {
                    Error::parse(origin, format!("line {}: {tok:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a square matrix; `.json` files use the envelope format, anything else CSV.
pub fn read_matrix(path: &Path) -> Result<SymMatrix> {
    let text = fs::read_to_string(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let env: MatrixEnvelope = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        return SymMatrix::try_from(env).map_err(|e| Error::parse(path, e.to_string()));
    }
    let rows = parse_csv_rows(&text, path)?;
    if rows.is_empty() {
        return Err(Error::parse(path, "empty matrix"));
    }
    SymMatrix::from_rows(&rows).map_err(|e| Error::parse(path, e.to_string()))
}

/// Reads an `n × d` observation matrix (one sample per row).
pub fn read_data_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let rows = parse_csv_rows(&text, path)?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::parse(path, "no samples"));
    }
    let d = rows[0].len();
    if let Some(k) = rows.iter().position(|r| r.len() != d) {
        return Err(Error::parse(
            path,
            format!("row {} has {} columns, expected {d}", k + 1, rows[k].len()),
        ));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

pub fn data_to_csv(data: &DMatrix<f64>) -> String {
    format_rows((0..data.nrows()).map(|i| data.row(i).iter().copied().collect()))
}

pub fn write_data_csv(path: &Path, data: &DMatrix<f64>) -> Result<()> {
    fs::write(path, data_to_csv(data))?;
    Ok(())
}

pub const EDGES_CSV_HEADER: &str = "i,j";

/// Edge list with a `i,j` header and one-based indices.
pub fn edges_to_csv(edges: &[Edge]) -> String {
    let mut out = format!("{EDGES_CSV_HEADER}\n");
    for (i, j) in edges {
        writeln!(out, "{},{}", i + 1, j + 1).unwrap();
    }
    out
}

pub fn write_edges_csv(path: &Path, edges: &[Edge]) -> Result<()> {
    fs::write(path, edges_to_csv(edges))?;
    Ok(())
}

/// True when the file starts with the edge-list header.
pub fn is_edges_csv(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().next().map(str::trim) == Some(EDGES_CSV_HEADER))
}

/// Reads an edge list written by [`write_edges_csv`]; returns zero-based pairs.
pub fn read_edges_csv(path: &Path) -> Result<Vec<Edge>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(EDGES_CSV_HEADER) {
        return Err(Error::parse(path, "missing i,j header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = || Error::parse(path, format!("line {}: expected two positive indices", n + 2));
            let mut it = line.split(',').map(|f| f.trim().parse::<usize>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) if i >= 1 && j > i => Ok((i - 1, j - 1)),
                _ => Err(bad()),
            }
        })
        .collect()
}
