//! Report documents: `report.json` plus one flat CSV per non-empty table.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::csvio::IoError;

/// A flat table. Cells are JSON scalars; `null` marks an undefined value
/// and is written as an empty CSV field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Panics if the row width differs from the header.
    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// JSON number for finite values, `null` otherwise.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub task: String,
    /// The fully resolved configuration that produced this report.
    pub config: RunConfig,
    pub results: Value,
    pub tables: BTreeMap<String, Table>,
}

impl ReportDocument {
    pub fn new(task: &str, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            task: task.into(),
            config: config.clone(),
            results: Value::Null,
            tables: BTreeMap::new(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_table(table: &Table, path: &Path) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let csv_err = |source| IoError::Csv {
        path: path.display().to_string(),
        source,
    };
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell)).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `report.json` and `<table>.csv` for every non-empty table into
/// `out_dir`, creating it if needed. Returns the written paths in order.
pub fn write_report(report: &ReportDocument, out_dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let json_path = out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report).expect("report serialises");
    text.push('\n');
    let mut f = File::create(&json_path).map_err(io_err(&json_path))?;
    f.write_all(text.as_bytes()).map_err(io_err(&json_path))?;
    let mut written = vec![json_path];
    for (name, table) in &report.tables {
        if table.is_empty() {
            continue;
        }
        let path = out_dir.join(format!("{name}.csv"));
        write_table(table, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<ReportDocument, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        source: e.into(),
    })
}
