use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use pmltm::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        let data = fs::read(path)?;
        Ok(FileRecord {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&data)),
            bytes: data.len() as u64,
        })
    }
}

/// Everything needed to re-run a command: the exact argument vector, the
/// resolved configuration and input hashes. Timestamps live only here so
/// the primary outputs stay byte-identical across runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub artifact_versions: serde_json::Value,
    pub started_unix_seconds: u64,
    pub elapsed_seconds: f64,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &str, threads: Option<usize>) -> Self {
        RunManifest {
            tool: "pmltm",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args: std::env::args().collect(),
            config: serde_json::Value::Null,
            seeds: Vec::new(),
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            artifact_versions: serde_json::json!({
                "model_format": pmltm::persist::MODEL_FORMAT_VERSION,
                "stop_words_sha256": pmltm::text::stop_word_hash(),
            }),
            started_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            elapsed_seconds: 0.0,
            clock: Some(Instant::now()),
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileRecord::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileRecord::of(path)?);
        Ok(())
    }

    /// Writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.elapsed_seconds = self.clock.map(|c| c.elapsed().as_secs_f64()).unwrap_or(0.0);
        let file = fs::File::create(dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(file, &self)?;
        Ok(())
    }
}
