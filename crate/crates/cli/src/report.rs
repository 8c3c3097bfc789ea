use std::fs;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::{Format, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub command: String,
    pub seed: u64,
    pub tolerance: f64,
    pub probes: usize,
    pub space: Option<String>,
    pub utility: Option<String>,
}

/// Every command emits one of these; the `result` shape depends on the
/// command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: Header,
    pub result: serde_json::Value,
}

impl Report {
    pub fn new(config: &RunConfig, result: serde_json::Value) -> Self {
        let header = Header {
            command: config.command.name().to_string(),
            seed: config.seed,
            tolerance: config.tolerance,
            probes: config.probes,
            space: config.space.as_ref().map(|p| p.display().to_string()),
            utility: config.utility.as_ref().map(|p| p.display().to_string()),
        };
        Self { header, result }
    }
}

/// CSV body: a header row and data rows.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub fn emit(config: &RunConfig, report: &Report, table: &Table) -> io::Result<()> {
    let mut buf = Vec::new();
    match config.format {
        Format::Text => {
            serde_json::to_writer_pretty(&mut buf, report)?;
            buf.push(b'\n');
        }
        Format::Csv => {
            // commented header keeps seed and tolerance with the data
            writeln!(
                buf,
                "# command={} seed={} tolerance={:e}",
                report.header.command, report.header.seed, report.header.tolerance
            )?;
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
    }
    match &config.out {
        Some(path) => fs::write(path, buf),
        None => io::stdout().write_all(&buf),
    }
}
