//! Run directory: scenario snapshot, output files and a manifest with content hashes.

use std::path::{Path, PathBuf};

use fowt_core::analysis::Scenario;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    argv: &'a [String],
    version: &'a str,
    scenario_source: &'a str,
    scenario_sha256: &'a str,
    started_utc: &'a str,
    finished_utc: String,
    status: &'a str,
    error: Option<String>,
    files: &'a [FileEntry],
}

pub struct RunDir {
    pub path: PathBuf,
    command: String,
    argv: Vec<String>,
    source: String,
    scenario_sha: String,
    started: String,
    files: Vec<FileEntry>,
}

fn now() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

impl RunDir {
    /// Creates `<parent>/<name>` (or `<parent>/<command>-<timestamp>`) and writes the scenario snapshot.
    pub fn create(parent: &Path, command: &str, name: Option<&str>, argv: &[String], source: &str, scenario: &Scenario) -> Result<Self, CliError> {
        let io = |e: std::io::Error, p: &Path| CliError::Runtime(format!("{}: {e}", p.display()));
        std::fs::create_dir_all(parent).map_err(|e| io(e, parent))?;
        let path = match name {
            Some(n) => {
                if n.is_empty() || n.contains(['/', '\\']) {
                    return Err(CliError::Usage(format!("invalid run name '{n}'")));
                }
                let p = parent.join(n);
                if p.exists() && std::fs::read_dir(&p).map_err(|e| io(e, &p))?.next().is_some() {
                    return Err(CliError::Runtime(format!("run directory {} already exists and is not empty", p.display())));
                }
                p
            }
            None => {
                let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
                let base = parent.join(format!("{command}-{stamp}"));
                let mut p = base.clone();
                let mut k = 1;
                while p.exists() {
                    p = PathBuf::from(format!("{}-{k}", base.display()));
                    k += 1;
                }
                p
            }
        };
        std::fs::create_dir_all(&path).map_err(|e| io(e, &path))?;
        let text = scenario.to_toml()?;
        let mut run = Self {
            path,
            command: command.into(),
            argv: argv.to_vec(),
            source: source.into(),
            scenario_sha: sha256_hex(text.as_bytes()),
            started: now(),
            files: Vec::new(),
        };
        run.write("scenario.toml", text.as_bytes())?;
        Ok(run)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path.join(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry { name: name.into(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, text.as_bytes())
    }

    pub fn finish(&self, error: Option<&CliError>) -> Result<(), CliError> {
        let m = Manifest {
            command: &self.command,
            argv: &self.argv,
            version: env!("CARGO_PKG_VERSION"),
            scenario_source: &self.source,
            scenario_sha256: &self.scenario_sha,
            started_utc: &self.started,
            finished_utc: now(),
            status: if error.is_some() { "error" } else { "ok" },
            error: error.map(|e| e.message().to_string()),
            files: &self.files,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Runtime(e.to_string()))?;
        let p = self.path.join("manifest.json");
        std::fs::write(&p, text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
    }
}
