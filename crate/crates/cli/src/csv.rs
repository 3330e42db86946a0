//! Minimal numeric CSV: a header row and rows of 17-significant-digit floats.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{}", format_float(*v)).expect("writing to a String");
            }
            s.push('\n');
        }
        s
    }

    /// Write to `path`, or to `out` when no path is configured.
    pub fn write(&self, path: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
        let text = self.render();
        match path {
            Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            }),
            None => out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
        }
    }
}

/// Scientific notation with 17 significant digits, which round-trips every `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// `x{a}_{α}` for every coordinate and `α < orders`.
pub fn jet_columns(prefix: &str, dim: usize, orders: usize) -> Vec<String> {
    (0..dim)
        .flat_map(|a| (0..orders).map(move |al| format!("{prefix}{a}_{al}")))
        .collect()
}
