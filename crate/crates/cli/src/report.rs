use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

/// A rendered result: columns for text and CSV output, a JSON value for
/// machine consumers. `notes` go above the table as `#` lines.
pub struct Report {
    pub notes: Vec<String>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = String::new();
                for n in &self.notes {
                    let _ = writeln!(s, "# {n}");
                }
                let _ = writeln!(s, "{}", self.headers.join(","));
                for r in &self.rows {
                    let _ = writeln!(s, "{}", r.join(","));
                }
                s
            }
            Format::Table => {
                let mut width: Vec<usize> = self.headers.iter().map(String::len).collect();
                for r in &self.rows {
                    for (w, c) in width.iter_mut().zip(r) {
                        *w = (*w).max(c.len());
                    }
                }
                let line = |cells: &[String]| {
                    let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
                    padded.join("  ").trim_end().to_string()
                };
                let mut s = String::new();
                for n in &self.notes {
                    let _ = writeln!(s, "# {n}");
                }
                let _ = writeln!(s, "{}", line(&self.headers));
                for r in &self.rows {
                    let _ = writeln!(s, "{}", line(r));
                }
                s
            }
        }
    }
}

pub fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), num)
}
