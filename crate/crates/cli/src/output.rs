use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Full round-trip precision, independent of locale.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub model_path: Option<String>,
    pub options: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
}

/// Collects outputs for one command run. Every file goes through an atomic
/// rename, and `finish` writes `manifest.json` listing them.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| jackson_core::Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        jackson_core::io::write_atomic(&self.dir.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        model_path: Option<&Path>,
        options: BTreeMap<String, String>,
        seed: Option<u64>,
    ) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            model_path: model_path.map(|p| p.display().to_string()),
            options,
            outputs: self.written,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
        };
        jackson_core::io::write_atomic(&self.dir.join("manifest.json"), &json_bytes(&manifest)?)?;
        Ok(())
    }
}
