//! Deterministic writers confined to one output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Format;
use crate::error::{CliError, Result};
use crate::table::fmt_f64;

/// Output directory together with the enabled formats.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    formats: Vec<Format>,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path, formats: &[Format]) -> Result<Self> {
        fs::create_dir_all(root).map_err(|source| CliError::Write { path: root.to_path_buf(), source })?;
        Ok(Self { root: root.to_path_buf(), formats: formats.to_vec(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        debug_assert!(!name.contains(['/', '\\']) && name != "..");
        self.root.join(name)
    }

    fn put(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|source| CliError::Write { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Pretty JSON with sorted keys; skipped when JSON output is disabled.
    pub fn json(&mut self, name: &str, data: &impl Serialize) -> Result<()> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        self.put(name, &to_json(data))
    }

    pub fn csv(&mut self, name: &str, text: &str) -> Result<()> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        self.put(name, text)
    }

    /// Run metadata, written regardless of the enabled formats.
    pub fn meta(&mut self, data: &Value) -> Result<()> {
        self.put("meta.json", &to_json(data))
    }
}

pub fn to_json(data: &impl Serialize) -> String {
    // routing through Value sorts object keys
    let v = serde_json::to_value(data).expect("serializable output");
    let mut s = serde_json::to_string_pretty(&v).expect("serializable value");
    s.push('\n');
    s
}

/// CSV text from a header and rows of numbers.
pub fn numeric_csv(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.into_iter().map(fmt_f64)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}
