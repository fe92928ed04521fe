use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jsonl::write_atomic;

/// Everything needed to repeat a run: the exact invocation, the resolved
/// configuration, seeds and the checksums of what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_path: Option<PathBuf>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Artifact file name to lowercase hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], output: &Path) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            config_path: None,
            config: serde_json::Value::Null,
            seeds: Vec::new(),
            output: output.to_path_buf(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn with_config(mut self, path: Option<&Path>, config: &impl Serialize) -> Self {
        self.config_path = path.map(Path::to_path_buf);
        self.config = serde_json::to_value(config).expect("config serializes");
        self
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        self.seeds = seeds.into_iter().collect();
        self
    }

    /// Writes `bytes` to `path` and records its checksum under its file name.
    pub fn write_artifact(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        self.artifacts.insert(name, sha256_hex(bytes));
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Runtime(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn records_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut m =
            RunManifest::new("mix", &["--seed".into(), "1".into()], dir.path()).with_seeds([1]);
        m.write_artifact(&dir.path().join("out.jsonl"), b"abc")
            .unwrap();
        m.save(&dir.path().join("manifest.json")).unwrap();
        let back: RunManifest = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(back, m);
        assert_eq!(back.artifacts["out.jsonl"], sha256_hex(b"abc"));
    }
}
