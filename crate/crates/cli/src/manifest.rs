use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use chrono::{DateTime, SecondsFormat, Utc};
use helprank::numerics::checkpoint::write_atomic;
use helprank::util::sha256_hex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const RUN_MANIFEST: &str = "run.json";

/// What a command consumed and produced, with enough detail to replay it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file; a later stage's `inputs` repeat these.
    pub outputs: BTreeMap<String, String>,
    pub started: String,
    pub finished: String,
}

pub struct Recorder {
    command: String,
    started: DateTime<Utc>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn start(command: &str) -> Self {
        Recorder { command: command.into(), started: Utc::now(), inputs: BTreeMap::new(), outputs: Vec::new() }
    }

    /// Records a file, or every regular file directly inside a directory.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        for p in files_at(path)? {
            self.inputs.insert(p.display().to_string(), hash_file(&p)?);
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Hashes the outputs and writes the manifest to `dest`.
    pub fn finish(self, dest: &Path, config: Value, seed: Option<u64>) -> Result<RunManifest> {
        let mut outputs = BTreeMap::new();
        for path in &self.outputs {
            for p in files_at(path)? {
                if p != dest {
                    outputs.insert(p.display().to_string(), hash_file(&p)?);
                }
            }
        }
        let manifest = RunManifest {
            command: self.command,
            argv: std::env::args().collect(),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            outputs,
            started: self.started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        };
        write_atomic(dest, &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

/// `<file>.run.json` next to a file artifact.
pub fn beside(file: &Path) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn files_at(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(helprank::Error::Io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(helprank::Error::Io)?))
}
