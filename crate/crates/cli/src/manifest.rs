//! Run manifests: the argument vector, working directory, seed, configuration
//! echo and SHA-256 digests of every input read and output written.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Path recorded for output sent to standard output.
pub const STDOUT: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_time_secs: f64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Resolved configuration of the command.
    pub config: toml::Table,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| file_err(path, source))?;
        toml::from_str(&text).map_err(|e| CliError::Manifest { path: path.display().to_string(), msg: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = toml::to_string(self)
            .map_err(|e| CliError::Manifest { path: path.display().to_string(), msg: e.to_string() })?;
        std::fs::write(path, text).map_err(|source| file_err(path, source))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::File { path: path.display().to_string(), source }
}

/// Collects what a command reads and writes while it runs.
pub struct Run {
    command: String,
    started: Instant,
    pub seed: Option<u64>,
    pub config: toml::Table,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Run {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: Instant::now(),
            seed: None,
            config: toml::Table::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Adds `value` under `key` in the configuration echo.
    pub fn echo<T: Serialize + ?Sized>(&mut self, key: &str, value: &T) -> CliResult<()> {
        let v = toml::Value::try_from(value)
            .map_err(|e| CliError::Usage(format!("cannot record configuration {key}: {e}")))?;
        self.config.insert(key.to_string(), v);
        Ok(())
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|source| file_err(path, source))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    /// Writes `content` to `path`, or to standard output when `path` is `None`.
    pub fn emit(&mut self, path: Option<&Path>, content: &[u8]) -> CliResult<()> {
        let label = match path {
            Some(p) => {
                std::fs::write(p, content).map_err(|source| file_err(p, source))?;
                p.display().to_string()
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(content).and_then(|_| out.flush()).map_err(|source| file_err(Path::new(STDOUT), source))?;
                STDOUT.to_string()
            }
        };
        self.outputs.push(FileDigest { path: label, sha256: sha256_hex(content) });
        Ok(())
    }

    /// First output written to a file, used to place the manifest.
    pub fn primary_output(&self) -> Option<&str> {
        self.outputs.iter().map(|o| o.path.as_str()).find(|p| *p != STDOUT)
    }

    pub fn finish(self, argv: Vec<String>) -> CliResult<RunManifest> {
        let cwd = std::env::current_dir().map_err(|source| file_err(Path::new("."), source))?;
        Ok(RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            argv,
            cwd,
            seed: self.seed,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            inputs: self.inputs,
            outputs: self.outputs,
            config: self.config,
        })
    }
}
