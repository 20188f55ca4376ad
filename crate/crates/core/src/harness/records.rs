//! CSV tables and JSON manifests written by the experiment commands.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest representation that parses back to the same value; `inf` for
/// infinities.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

/// Writes `header` plus a trailing `config_hash` column, then every row with
/// `hash` appended.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>], hash: &str) -> Result<()> {
    ensure_parent(path)?;
    let csv_err = |e: csv::Error| Error::format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut head: Vec<&str> = header.to_vec();
    head.push("config_hash");
    w.write_record(&head).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::shape(format!(
                "csv row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(String::as_str).chain([hash])).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_manifest<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut json = serde_json::to_string_pretty(value).map_err(|e| Error::format(e.to_string()))?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}
