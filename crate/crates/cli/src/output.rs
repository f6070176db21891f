//! Atomic CSV/JSON writers.
//!
//! Values are printed with 17 significant digits so that reading them
//! back reproduces the exact doubles. Files are written to a temporary
//! sibling and renamed into place, so an interrupted run never clobbers
//! a previous result.

use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Requested table format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension(format!(
        "{}.tmp.{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Numeric(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

/// A column-oriented numeric table.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<(), CliError> {
        let contents = match format {
            Format::Csv => {
                let mut out = String::new();
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                #[derive(Serialize)]
                struct JsonTable<'a> {
                    columns: &'a [&'static str],
                    rows: &'a [Vec<f64>],
                }
                let mut s = serde_json::to_string_pretty(&JsonTable {
                    columns: &self.columns,
                    rows: &self.rows,
                })
                .expect("table serialization cannot fail");
                s.push('\n');
                s
            }
        };
        write_atomic(path, &contents)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("serialization failed: {e}")))?;
    s.push('\n');
    write_atomic(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrips_doubles() {
        let mut table = Table::new(vec!["x", "y"]);
        table.push(vec![std::f64::consts::PI, 1.0 / 3.0]);
        table.push(vec![f64::NAN, -2.5e-17]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        table.write(&path, Format::Csv).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,y");
        let row: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(row[0], std::f64::consts::PI);
        assert_eq!(row[1], 1.0 / 3.0);
        let row2: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|c| c.parse().unwrap())
            .collect();
        assert!(row2[0].is_nan());
        assert_eq!(row2[1], -2.5e-17);
    }
}
