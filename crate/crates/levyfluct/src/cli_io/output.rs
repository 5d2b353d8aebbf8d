//! Result files: JSON envelopes and CSV tables, each carrying the schema
//! version and the configuration, written by atomic rename.

use super::config::RunConfig;
use crate::error::Result;
use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

/// `{schema_version, command, config, result}` as pretty JSON.
pub fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    command: &str,
    config: &RunConfig,
    result: &T,
) -> Result<PathBuf> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// A CSV table under construction. Floats use the shortest round-trip
/// form, so equal values print identically.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows
            .push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Two `#` lines (schema version, config) then the header and rows.
    pub fn render(&self, command: &str, config: &RunConfig) -> Result<String> {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# schema_version: {SCHEMA_VERSION}, command: {command}"
        );
        let _ = writeln!(out, "# config: {}", serde_json::to_string(config)?);
        let _ = writeln!(out, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        Ok(out)
    }

    pub fn write(
        &self,
        dir: &Path,
        name: &str,
        command: &str,
        config: &RunConfig,
    ) -> Result<PathBuf> {
        let path = dir.join(name);
        write_atomic(&path, self.render(command, config)?.as_bytes())?;
        Ok(path)
    }
}

/// One CSV field; missing values print empty.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Missing,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Real(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Missing => Ok(()),
        }
    }
}

/// `Re, Im` cells of an optional complex value.
pub fn complex_cells(z: Option<Complex64>) -> [Cell; 2] {
    match z {
        Some(z) => [Cell::Real(z.re), Cell::Real(z.im)],
        None => [Cell::Missing, Cell::Missing],
    }
}

/// Reads the data rows of a table written by [`Table::write`].
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| {
                    if v.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        v.parse::<f64>()
                    }
                })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| crate::FluctError::InvalidInput(format!("bad number in table: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["x", "re", "im"]);
        t.push(vec![Cell::Real(0.1), Cell::Real(1.0 / 3.0), Cell::Missing]);
        let cfg = RunConfig::default();
        let path = t.write(dir.path(), "t.csv", "test", &cfg).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# schema_version: 1"));
        assert!(text.contains("\"model\""));
        let (h, rows) = read_table(&text).unwrap();
        assert_eq!(h, ["x", "re", "im"]);
        assert_eq!(rows[0][1], 1.0 / 3.0);
        assert!(rows[0][2].is_nan());
        assert!(!dir.path().join(".t.csv.tmp").exists());
    }
}
