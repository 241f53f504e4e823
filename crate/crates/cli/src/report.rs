//! Tabular study results and their CSV serialization.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use emi_cutfem::norms::eoc;

/// One table of a study: named columns of numbers, one row per level or sweep position.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Free-form run information written next to the table, never into it.
    pub metadata: BTreeMap<String, String>,
}

impl StudyReport {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Last entry of a column.
    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name)?.last().copied()
    }

    /// Writes `<dir>/<name>.csv`; NaN is written empty and infinity as `singular`.
    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| format_value(v)))?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Writes `<dir>/<name>.meta.toml` with the metadata entries.
    pub fn write_metadata(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.meta.toml", self.name));
        std::fs::write(&path, toml::to_string(&self.metadata)?)?;
        Ok(path)
    }

    /// Plain-text rendering for the terminal.
    pub fn to_table(&self) -> String {
        let cells: Vec<Vec<String>> = std::iter::once(self.columns.clone())
            .chain(self.rows.iter().map(|r| r.iter().map(|&v| format_value(v)).collect()))
            .collect();
        let widths: Vec<usize> =
            (0..self.columns.len()).map(|k| cells.iter().map(|r| r[k].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in cells {
            let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        "singular".into()
    } else if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v:.6e}")
    }
}

/// EOC column for errors `e` at mesh sizes `h`; the first entry is NaN.
pub fn eoc_column(e: &[f64], h: &[f64]) -> Vec<f64> {
    (0..e.len()).map(|k| if k == 0 { f64::NAN } else { eoc(e[k - 1], e[k], h[k - 1], h[k]) }).collect()
}
