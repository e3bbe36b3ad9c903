//! Output formatting shared by reports and CSV artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// A real with 17 significant digits, round-trippable.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with struct field order preserved and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json_string(value)?)?;
    Ok(())
}

/// Write rows of reals under a header.
pub fn write_csv_rows(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_real(*x)))?;
    }
    w.flush()?;
    Ok(())
}
