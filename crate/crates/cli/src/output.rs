//! Tables and their CSV / JSON-lines encodings.

use crate::config::Format;
use serde_json::{Map, Value};
use std::io::{self, Write};

/// Version tag of the CSV layout.
pub const CSV_VERSION: &str = "besselkit-csv v1";
/// Version tag of the JSON-lines layout.
pub const JSONL_VERSION: &str = "besselkit-jsonl v1";

/// A named-column table with run metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    /// Column names.
    pub columns: Vec<&'static str>,
    /// Rows, one cell per column.
    pub rows: Vec<Vec<Value>>,
    /// Metadata pairs emitted in the header.
    pub meta: Vec<(String, String)>,
}

impl Table {
    /// An empty table with `columns`.
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new(), meta: Vec::new() }
    }

    /// Appends a row; its length must match the columns.
    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Appends a metadata pair.
    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }
}

/// A real cell; non-finite values become strings.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(format!("{x}")), Value::Number)
}

/// A text cell.
pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.17e}"),
            _ => n.to_string(),
        },
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

/// Writes `table` for `command` in `format`.
pub fn write_table<W: Write>(out: &mut W, command: &str, table: &Table, format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "# {CSV_VERSION} command={command}")?;
            for (k, v) in &table.meta {
                writeln!(out, "# {k}={}", one_line(v))?;
            }
            writeln!(out, "{}", table.columns.join(","))?;
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(csv_cell).collect();
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Format::Jsonl => {
            let mut head = Map::new();
            head.insert("format".into(), text(JSONL_VERSION));
            head.insert("command".into(), text(command));
            let meta: Map<String, Value> = table.meta.iter().map(|(k, v)| (k.clone(), text(v.clone()))).collect();
            head.insert("meta".into(), Value::Object(meta));
            writeln!(out, "{}", Value::Object(head))?;
            for row in &table.rows {
                let obj: Map<String, Value> =
                    table.columns.iter().zip(row).map(|(c, v)| ((*c).to_string(), v.clone())).collect();
                writeln!(out, "{}", Value::Object(obj))?;
            }
        }
    }
    Ok(())
}
