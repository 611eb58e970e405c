use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub commands: Vec<String>,
    /// Seconds since the Unix epoch; zero under `--deterministic`.
    pub created_unix: u64,
    pub updated_unix: u64,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_unix(deterministic: bool) -> u64 {
    if deterministic {
        return 0;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Start a manifest for `dir`, extending an existing one written from the
    /// same configuration.
    pub fn open(dir: &Path, config_hash: &str, command: &str, deterministic: bool) -> Self {
        let now = now_unix(deterministic);
        let mut manifest = match Self::load(dir) {
            Ok(m) if m.config_hash == config_hash => m,
            _ => RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config_hash: config_hash.into(),
                commands: Vec::new(),
                created_unix: now,
                updated_unix: now,
                artifacts: Vec::new(),
            },
        };
        manifest.updated_unix = now;
        if !manifest.commands.iter().any(|c| c == command) {
            manifest.commands.push(command.into());
        }
        manifest
    }

    /// Write `bytes` to `dir/name` and record its digest.
    pub fn write_artifact(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        std::fs::write(dir.join(name), bytes)
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", dir.join(name).display()))?;
        let entry = Artifact {
            path: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        };
        match self.artifacts.iter_mut().find(|a| a.path == name) {
            Some(existing) => *existing = entry,
            None => self.artifacts.push(entry),
        }
        Ok(())
    }

    pub fn save(&mut self, dir: &Path) -> anyhow::Result<()> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Paths whose current content no longer matches the recorded digest.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| match std::fs::read(dir.join(&a.path)) {
                Ok(bytes) => sha256_hex(&bytes) != a.sha256,
                Err(_) => true,
            })
            .map(|a| a.path.clone())
            .collect()
    }
}
