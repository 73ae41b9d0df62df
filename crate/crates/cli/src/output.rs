//! Tabular output with a provenance line.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where a result came from: tool version, model hash, seed.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// `sha256:<hex>` of the model file bytes, or `-`.
    pub model: String,
    pub seed: u64,
}

impl Provenance {
    fn comment(&self) -> String {
        format!(
            "# {} {} command={} model={} seed={}",
            self.tool, self.version, self.command, self.model, self.seed
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    /// Extra fields for the JSON form only.
    pub extra: serde_json::Map<String, Value>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv(&self, prov: &Provenance) -> Result<Vec<u8>> {
        let mut buf = format!("{}\n", prov.comment()).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.columns)?;
            for row in &self.rows {
                w.write_record(row.iter().map(cell))?;
            }
            w.flush()?;
        }
        Ok(buf)
    }

    fn json(&self, prov: &Provenance) -> Result<Vec<u8>> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
            .collect();
        let mut doc = json!({ "provenance": prov, "rows": rows });
        for (k, v) in &self.extra {
            doc[k] = v.clone();
        }
        let mut out = serde_json::to_vec_pretty(&doc)?;
        out.push(b'\n');
        Ok(out)
    }

    /// Writes to `<out>/<command>.<ext>`, or to stdout without `out`.
    pub fn emit(&self, format: Format, prov: &Provenance, out: Option<&Path>) -> Result<()> {
        let bytes = match format {
            Format::Csv => self.csv(prov)?,
            Format::Json => self.json(prov)?,
        };
        match out {
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("{}.{}", prov.command, format.extension()));
                fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            }
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(&bytes)?;
                stdout.flush()?;
            }
        }
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
