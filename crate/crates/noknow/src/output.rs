//! Tabular results and their CSV / JSON-lines encodings.
//!
//! Every file starts with the run metadata: tool version, experiment, schema
//! tag, config hash, seed, dt and the resolved configuration. In CSV these
//! are `#`-prefixed lines ahead of the header row; in JSON-lines the first
//! line is a `{"metadata": {...}}` object. Nothing time- or host-dependent is
//! written, so equal runs give equal bytes.

use std::io::Write;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// `<experiment>/<version>`; bumped whenever columns change.
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(schema: &str, columns: Vec<String>) -> Self {
        Self {
            schema: schema.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Cell>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Hex SHA-256 of the canonical (sorted-key, compact) resolved configuration.
pub fn config_hash(resolved: &Map<String, Value>) -> String {
    let canonical = serde_json::to_string(resolved).expect("JSON map serializes");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Ordered metadata entries of a run.
pub fn metadata(cfg: &RunConfig, schema: &str) -> Vec<(&'static str, Value)> {
    let resolved = cfg.resolved();
    let mut out = vec![
        ("noknow_version", Value::from(VERSION)),
        ("experiment", Value::from(cfg.experiment.name())),
        ("schema", Value::from(schema)),
        ("config_sha256", Value::from(config_hash(&resolved))),
        ("seed", Value::from(cfg.seed)),
    ];
    out.push(("dt", cfg.integrator.map_or(Value::Null, |ic| Value::from(ic.dt))));
    out.push(("config", Value::Object(resolved)));
    out
}

pub fn write_table<W: Write>(out: W, cfg: &RunConfig, table: &Table) -> Result<(), CliError> {
    match cfg.format {
        OutputFormat::Csv => write_csv(out, cfg, table),
        OutputFormat::JsonLines => write_json_lines(out, cfg, table),
    }
}

fn write_csv<W: Write>(mut out: W, cfg: &RunConfig, table: &Table) -> Result<(), CliError> {
    let io = |e| CliError::io("writing output", e);
    for (k, v) in metadata(cfg, &table.schema) {
        let shown = match v {
            Value::String(s) => s,
            other => other.to_string(),
        };
        writeln!(out, "# {k}: {shown}").map_err(io)?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv))?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

fn write_json_lines<W: Write>(mut out: W, cfg: &RunConfig, table: &Table) -> Result<(), CliError> {
    let io = |e| CliError::io("writing output", e);
    let meta: Map<String, Value> = metadata(cfg, &table.schema)
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let mut head = Map::new();
    head.insert("metadata".into(), Value::Object(meta));
    writeln!(out, "{}", Value::Object(head)).map_err(io)?;
    for row in &table.rows {
        let obj: Map<String, Value> = table.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
        writeln!(out, "{}", Value::Object(obj)).map_err(io)?;
    }
    out.flush().map_err(io)
}
