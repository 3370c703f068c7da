//! Deterministic CSV and JSON tables.
//!
//! Floating-point cells are written with 12 significant digits in scientific
//! notation, so identical inputs always give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(SimError::Usage(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    /// Fixed-point with the given number of decimals.
    Fixed(f64, usize),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// 12 significant digits, e.g. `1.99898453000e-4`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.11e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_number(*x),
            Cell::Fixed(x, d) => format!("{x:.d$}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn render_json(&self, out: &mut String) {
        match self {
            Cell::Num(x) | Cell::Fixed(x, _) if !x.is_finite() => out.push_str("null"),
            Cell::Text(s) => out.push_str(&serde_json::Value::String(s.clone()).to_string()),
            other => out.push_str(&other.render()),
        }
    }
}

/// A header, rows of cells and `key=value` metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// CSV with a leading `# key=value ...` comment line when metadata exists.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        if !self.metadata.is_empty() {
            let line: Vec<String> = self.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(out, "# {}", line.join(" ")).expect("writing to memory");
        }
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::render))?;
        }
        writer
            .into_inner()
            .map_err(|e| SimError::Csv(e.into_error().into()))
    }

    /// `{"metadata": {...}, "columns": [...], "rows": [[...], ...]}`.
    pub fn to_json(&self) -> Vec<u8> {
        let quote = |s: &str| serde_json::Value::String(s.to_string()).to_string();
        let mut out = String::from("{\n  \"metadata\": {");
        for (i, (k, v)) in self.metadata.iter().enumerate() {
            let sep = if i == 0 { "" } else { ", " };
            let _ = write!(out, "{sep}{}: {}", quote(k), quote(v));
        }
        out.push_str("},\n  \"columns\": [");
        out.push_str(
            &self
                .columns
                .iter()
                .map(|c| quote(c))
                .collect::<Vec<_>>()
                .join(", "),
        );
        out.push_str("],\n  \"rows\": [");
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(if i == 0 { "\n    [" } else { ",\n    [" });
            for (j, cell) in row.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                cell.render_json(&mut out);
            }
            out.push(']');
        }
        out.push_str(if self.rows.is_empty() {
            "]\n}\n"
        } else {
            "\n  ]\n}\n"
        });
        out.into_bytes()
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }
}

/// Writes `table` to `path`, or to standard output when `path` is `None`.
pub fn emit(table: &Table, format: Format, path: Option<&Path>) -> Result<()> {
    let bytes = table.render(format)?;
    match path {
        Some(path) => fs::write(path, bytes).map_err(|e| SimError::io(path, e)),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| SimError::io("<stdout>", e)),
    }
}
