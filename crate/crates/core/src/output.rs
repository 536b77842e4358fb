//! CSV and JSON artifacts. Floats are written with `{:.16e}` so that every value
//! round-trips exactly and repeated runs produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            write!(s, "{v:.16e}").unwrap();
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Header and rows of a CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let bad = |reason: String| Error::Artifact { path: path.display().to_string(), reason };
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line.split(',').map(|t| t.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|e| bad(format!("line {}: {e}", n + 2)))?;
        if row.len() != header.len() {
            return Err(bad(format!("line {} has {} fields, header has {}", n + 2, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
