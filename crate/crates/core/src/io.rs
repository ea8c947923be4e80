//! Small CSV helpers shared by the file formats of the other modules.
//!
//! Numbers are written with 17 significant digits, `.` as decimal separator and
//! `\n` line endings, so that re-running an experiment reproduces files byte for
//! byte.

use std::fmt::Write;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits.
/// Negative zero is written as `0`.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Appends one comma-separated row.
pub fn push_row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let v = if *v == 0.0 { 0.0 } else { *v };
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// Parses a headed numeric CSV table; the header must match `header` exactly.
pub fn parse_table(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != header {
        return Err(Error::Parse(format!("expected header {:?}, found {:?}", header.join(","), head)));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", n + 1)))?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!("row {} has {} columns, expected {}", n + 1, row.len(), header.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("row {} has a non-finite value", n + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}
