//! CSV and JSON report writers.
//!
//! CSV files open with a `#` block echoing the configuration, tool version and
//! seed, followed by a single timestamp line (the only line that varies between
//! identical runs), the column row and the data rows.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{invalid, Result};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Prefix of the header line that carries the wall-clock time.
pub const TIMESTAMP_PREFIX: &str = "# timestamp:";

/// Round-trip-safe rendering with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// Everything needed to reproduce an output file.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: String,
    pub flags: BTreeMap<String, String>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(subcommand: impl Into<String>, seed: u64) -> Self {
        Self {
            subcommand: subcommand.into(),
            flags: BTreeMap::new(),
            seed,
        }
    }

    pub fn flag(mut self, key: &str, value: impl ToString) -> Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => fmt_num(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A homogeneous table with its configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid(format!("unknown format `{other}`"))),
        }
    }
}

impl Table {
    pub fn new(config: ExperimentConfig, columns: &[&str]) -> Self {
        Self {
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(invalid(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let config = serde_json::to_string(&self.config)?;
        writeln!(out, "# tool: {TOOL_VERSION}")?;
        writeln!(out, "# config: {config}")?;
        writeln!(out, "# seed: {}", self.config.seed)?;
        writeln!(out, "{TIMESTAMP_PREFIX} {}", unix_time())?;
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        wtr.write_record(&self.columns)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(Cell::render))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let rows: Vec<BTreeMap<&str, &Cell>> = self
            .rows
            .iter()
            .map(|r| self.columns.iter().map(String::as_str).zip(r).collect())
            .collect();
        #[derive(Serialize)]
        struct Doc<'a> {
            config: &'a ExperimentConfig,
            tool: &'a str,
            rows: Vec<BTreeMap<&'a str, &'a Cell>>,
        }
        serde_json::to_writer_pretty(
            out,
            &Doc {
                config: &self.config,
                tool: TOOL_VERSION,
                rows,
            },
        )?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Write to `path`, creating parent directories.
    pub fn write_path(&self, path: &Path, format: Format) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let file = std::io::BufWriter::new(fs::File::create(path)?);
        match format {
            Format::Csv => self.write_csv(file),
            Format::Json => self.write_json(file),
        }
    }
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Drop the timestamp line so two outputs can be compared byte for byte.
pub fn mask_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}
