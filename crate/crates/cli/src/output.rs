//! Atomic output files and the run manifests written next to them.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use aud_core::AudError;

/// Write `contents` to a temporary file in the destination directory, then
/// rename it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> aud_core::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AudError::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| AudError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| AudError::io(path, e))?;
    tmp.persist(path).map_err(|e| AudError::io(path, e.error))?;
    Ok(())
}

/// Sidecar describing how an output was produced. Holds no timestamps, so
/// reruns with the same arguments reproduce it byte for byte.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: Value,
}

impl RunManifest {
    pub fn new(command: &'static str, argv: &[String], config: Value) -> Self {
        Self {
            tool: "aud",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: argv.to_vec(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
        }
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.display().to_string());
        self
    }

    pub fn output(mut self, p: &Path) -> Self {
        self.outputs.push(p.display().to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Write `<output>.run.json` next to every output.
    pub fn write(&self) -> aud_core::Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| AudError::InternalState(format!("cannot serialize run manifest: {e}")))?;
        text.push('\n');
        for out in &self.outputs {
            write_atomic(&sidecar_path(Path::new(out)), text.as_bytes())?;
        }
        Ok(())
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    output.with_file_name(name)
}
