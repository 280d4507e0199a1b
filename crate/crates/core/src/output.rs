//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting,
//! which never depends on locale; non-finite values become empty CSV cells
//! and JSON `null`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::engine::Channels;
use crate::error::Result;

pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Writes named equal-length columns as a rectangular CSV table.
pub fn write_columns(path: &Path, columns: &[(&str, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns.iter().map(|(name, _)| *name))?;
    let rows = columns.first().map_or(0, |(_, v)| v.len());
    for r in 0..rows {
        w.write_record(columns.iter().map(|(_, v)| format_f64(v[r])))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timeseries(path: &Path, channels: &Channels) -> Result<()> {
    write_columns(path, &channels.columns())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_values_are_never_written_as_text() {
        assert_eq!(format_f64(f64::NAN), "");
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(1e-7), "0.0000001");
        let json = serde_json::to_string(&[f64::NAN, f64::INFINITY]).unwrap();
        assert_eq!(json, "[null,null]");
    }

    #[test]
    fn csv_is_rectangular() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_columns(&path, &[("a", vec![1.0, 2.0]), ("b", vec![f64::NAN, 0.5])]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1,\n2,0.5\n");
    }
}
