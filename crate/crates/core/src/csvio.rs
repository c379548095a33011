//! Numeric CSV loading. Files store one sample per row; the engine works
//! with samples as columns, so the loader transposes at the boundary.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Loads a CSV of `K` rows by `N` columns into an `N x K` matrix (samples
/// become columns). Rejects ragged rows, non-numeric fields, and non-finite
/// values. `skip_header` drops the first line.
pub fn load_columns(path: &Path, skip_header: bool) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {}", path.display(), e))))?;
    parse_columns(&text, skip_header)
        .map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {}", path.display(), msg)),
            other => other,
        })
}

pub fn parse_columns(text: &str, skip_header: bool) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        if idx == 0 && skip_header {
            continue;
        }
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad number '{}'", idx + 1, field.trim())))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "line {}: non-finite value '{}'",
                    idx + 1,
                    field.trim()
                )));
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse(format!(
                    "line {}: {} fields, expected {}",
                    idx + 1,
                    row.len(),
                    w
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let samples = rows.len();
    let features = rows[0].len();
    Ok(Matrix::from_fn(features, samples, |i, k| rows[k][i]))
}

/// Writes an `N x K` matrix as a CSV of `K` sample rows.
pub fn save_columns(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::new();
    for k in 0..m.cols() {
        for i in 0..m.rows() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(i, k)]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
