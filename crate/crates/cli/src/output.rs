//! Run directories, CSV files and the `meta.json` run record.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Version of every CSV layout and of `meta.json`.
pub const SCHEMA_VERSION: u32 = 1;

/// First line written after the last row of a run that did not finish.
pub const INCOMPLETE_MARKER: &str = "# incomplete run";

pub fn build_id() -> String {
    format!("permnqs {} ({})", env!("CARGO_PKG_VERSION"), env!("PERMNQS_GIT_REV"))
}

pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn create(path: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&path).map_err(|e| CliError::io_path("create", &path, e))?;
        Ok(Self { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn csv(&self, name: &str, header: &[String]) -> Result<CsvWriter, CliError> {
        CsvWriter::create(self.file(name), header)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.file(name);
        std::fs::write(&path, text).map_err(|e| CliError::io_path("write", &path, e))
    }

    pub fn write_meta(&self, meta: &RunMeta<'_>) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(meta)
            .map_err(|e| CliError::Config(format!("cannot encode run record: {e}")))?;
        self.write_text("meta.json", &(text + "\n"))
    }
}

/// Line-oriented CSV writer for numeric tables.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    fn create(path: PathBuf, header: &[String]) -> Result<Self, CliError> {
        let file = File::create(&path).map_err(|e| CliError::io_path("create", &path, e))?;
        let mut w = Self {
            path,
            out: BufWriter::new(file),
            columns: header.len(),
        };
        w.line(&header.join(","))?;
        Ok(w)
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        debug_assert_eq!(cells.len(), self.columns, "row width must match the header");
        self.line(&cells.join(","))
    }

    /// Appends the incomplete-run marker with a one-line reason.
    pub fn mark_incomplete(&mut self, reason: &str) -> Result<(), CliError> {
        let reason = reason.replace(['\n', '\r'], " ");
        self.line(&format!("{INCOMPLETE_MARKER}: {reason}"))?;
        self.flush()
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.out
            .flush()
            .map_err(|e| CliError::io_path("write", &self.path, e))
    }

    fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.out, "{text}").map_err(|e| CliError::io_path("write", &self.path, e))
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Contents of `meta.json`. Feeding this file back as the config reproduces
/// the run.
#[derive(Debug, Serialize)]
pub struct RunMeta<'a> {
    pub schema_version: u32,
    pub subcommand: &'a str,
    pub run_id: &'a str,
    pub build: String,
    pub seed: u64,
    pub sampler_seed: u64,
    pub status: &'a str,
    pub outputs: Vec<&'a str>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
    pub config: &'a ExperimentConfig,
}

impl<'a> RunMeta<'a> {
    pub fn new(subcommand: &'a str, config: &'a ExperimentConfig, outputs: Vec<&'a str>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            subcommand,
            run_id: &config.output.run_id,
            build: build_id(),
            seed: config.trainer.seed,
            sampler_seed: config.sampler.rng_seed,
            status: "complete",
            outputs,
            details: serde_json::Value::Null,
            config,
        }
    }
}
