//! Output files. CSV files open with `#` comment lines carrying the version
//! and the full configuration; JSON files carry `version` and `config`
//! fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rhgcn_core::diagnostics::{BoundReport, EnergyTrace};
use rhgcn_core::train::EpochMetrics;

use crate::config::RunConfig;
use crate::error::CliError;

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `{"version": .., "config": .., ...fields}`.
pub fn with_echo(config: &RunConfig, fields: serde_json::Value) -> serde_json::Value {
    let mut obj = serde_json::Map::new();
    obj.insert("version".into(), crate::VERSION.into());
    obj.insert("config".into(), config.to_json());
    if let serde_json::Value::Object(f) = fields {
        obj.extend(f);
    }
    serde_json::Value::Object(obj)
}

/// A CSV file whose first lines echo the version and configuration.
pub struct CsvOut {
    path: std::path::PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, config: &RunConfig, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut buf = BufWriter::new(file);
        let io = |e| CliError::io(path, e);
        writeln!(buf, "# rhgcn {}", crate::VERSION).map_err(io)?;
        for (k, v) in config.to_pairs() {
            writeln!(buf, "# {k} = {v}").map_err(io)?;
        }
        let mut inner = csv::Writer::from_writer(buf);
        inner.write_record(header).map_err(|e| CliError::Format(e.to_string()))?;
        Ok(Self { path: path.to_path_buf(), inner })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.inner.write_record(fields).map_err(|e| CliError::Format(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub const METRICS_HEADER: &[&str] = &["epoch", "train_loss", "val_loss", "val_acc", "test_acc"];

pub fn metrics_row(m: &EpochMetrics) -> Vec<String> {
    vec![
        m.epoch.to_string(),
        m.train_loss.to_string(),
        m.val_loss.to_string(),
        m.val_acc.to_string(),
        m.test_acc.to_string(),
    ]
}

pub fn write_energy_trace(path: &Path, config: &RunConfig, trace: &EnergyTrace) -> Result<(), CliError> {
    let mut out = CsvOut::create(path, config, &["layer", "component", "energy", "max_energy"])?;
    for layer in &trace.layers {
        for (j, e) in layer.energies.iter().enumerate() {
            out.row(&[layer.layer.to_string(), j.to_string(), e.to_string(), layer.max.to_string()])?;
        }
    }
    out.finish()
}

pub fn write_bound_rows(path: &Path, config: &RunConfig, report: &BoundReport) -> Result<(), CliError> {
    let header = ["layer", "component", "energy", "bound", "op_norm", "holds", "skipped"];
    let mut out = CsvOut::create(path, config, &header)?;
    for r in &report.rows {
        out.row(&[
            r.layer.to_string(),
            r.component.to_string(),
            r.energy.to_string(),
            r.bound.to_string(),
            r.op_norm.to_string(),
            r.holds.to_string(),
            r.skipped.to_string(),
        ])?;
    }
    out.finish()
}

/// Reads the data rows of a CSV written by [`CsvOut`].
pub fn read_rows(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    rdr.records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| CliError::Format(e.to_string())))
        .collect()
}
