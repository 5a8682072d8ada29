//! Small CSV/number-formatting helpers shared by the exporters.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Fixed-point decimal rendering with at least 12 significant digits.
pub fn format_decimal(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes a header line followed by `key,value` rows.
pub fn write_two_column_csv<K: ToString>(
    path: &Path,
    header: (&str, &str),
    rows: impl IntoIterator<Item = (K, f64)>,
) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([header.0, header.1])?;
    for (k, v) in rows {
        w.write_record([k.to_string(), format_decimal(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a two-column CSV written by [`write_two_column_csv`].
pub fn read_two_column_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        };
        if rec.len() != 2 {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        out.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(out)
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}
