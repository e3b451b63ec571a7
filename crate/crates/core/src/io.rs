//! Plain-text file formats: JSON documents and CSV numeric payloads.
//!
//! Numbers are written with 17 significant digits so every `f64`
//! round-trips exactly.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {t:?}")))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Matrix CSV: a `# rows=m cols=n` line followed by one row per line.
pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = format!("# rows={} cols={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a matrix CSV. The header line is optional; blank lines and
/// other `#` comments are skipped.
pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let mut declared: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut r = None;
            let mut c = None;
            for tok in rest.split_whitespace() {
                if let Some(v) = tok.strip_prefix("rows=") {
                    r = v.parse().ok();
                } else if let Some(v) = tok.strip_prefix("cols=") {
                    c = v.parse().ok();
                }
            }
            if let (Some(r), Some(c)) = (r, c) {
                declared = Some((r, c));
            }
            continue;
        }
        rows.push(line.split(',').map(parse_f64).collect::<Result<Vec<f64>>>()?);
    }
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("rows have different lengths".into()));
    }
    if let Some((r, c)) = declared {
        if r != rows.len() || (r > 0 && c != ncols) {
            return Err(Error::Parse(format!(
                "header declares {r}x{c} but the file holds {}x{ncols}",
                rows.len()
            )));
        }
        if r == 0 {
            return Ok(Matrix::zeros(0, c));
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("matrix file holds no rows".into()));
    }
    let m = Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix file".into()));
    }
    Ok(m)
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

/// CSV with a header row and numeric columns of equal length.
pub fn columns_to_csv(header: &[&str], columns: &[&[f64]]) -> String {
    let n = columns.first().map_or(0, |c| c.len());
    debug_assert!(columns.iter().all(|c| c.len() == n));
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
