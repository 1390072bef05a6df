use crate::error::CliError;
use biaslens_core::report::write_atomic;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Named input files with content hashes, recorded in every report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Inputs(BTreeMap<&'static str, InputFile>);

impl Inputs {
    /// Reads `path`, records its hash under `role`, and hands back the bytes.
    pub fn read(&mut self, role: &'static str, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.0.insert(
            role,
            InputFile {
                path: path.display().to_string(),
                sha256: sha256_hex(&bytes),
            },
        );
        Ok(bytes)
    }

    pub fn read_string(&mut self, role: &'static str, path: &Path) -> Result<String, CliError> {
        let bytes = self.read(role, path)?;
        String::from_utf8(bytes)
            .map_err(|e| CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files; timestamps go to `run_meta.json`, never into reports.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
    started: SystemTime,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: SystemTime::now(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_atomic(&path, contents)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.write(name, body.as_bytes())
    }

    pub fn finish(mut self, command: &str, endpoint: Option<&str>, inputs: &Inputs) -> Result<Vec<String>, CliError> {
        let unix = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let meta = serde_json::json!({
            "command": command,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "endpoint": endpoint,
            "inputs": inputs,
            "started_unix": unix(self.started),
            "finished_unix": unix(SystemTime::now()),
            "outputs": self.written,
        });
        self.write_json("run_meta.json", &meta)?;
        Ok(self.written)
    }
}
