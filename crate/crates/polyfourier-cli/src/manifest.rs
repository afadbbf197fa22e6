//! Output directories with digests, and the run manifest that describes them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use polyfourier::output::CsvTable;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// File name of the manifest inside an output directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Digest of one artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to repeat a run and check its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Effective command line, with any config file expanded.
    pub args: Vec<String>,
    pub seed: u64,
    pub threads: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputDigest>,
    /// The run stopped early; `outputs` lists what was written before the error.
    pub partial: bool,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// An output directory that records the digest of every file written to it.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<OutputDigest>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.retain(|d| d.file != name);
        self.written.push(OutputDigest {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        self.write(name, table.to_csv().as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn digests(&self) -> &[OutputDigest] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn rewriting_a_file_keeps_one_digest() {
        let dir = std::env::temp_dir().join(format!("polyfourier-manifest-{}", std::process::id()));
        let mut out = OutputDir::create(&dir).unwrap();
        out.write("a.csv", b"x\n").unwrap();
        out.write("a.csv", b"y\n").unwrap();
        assert_eq!(out.digests().len(), 1);
        assert_eq!(out.digests()[0].sha256, sha256_hex(b"y\n"));
        fs::remove_dir_all(dir).unwrap();
    }
}
