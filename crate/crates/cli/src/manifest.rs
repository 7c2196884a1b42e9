//! The run manifest: per-stage records of input hashes, config hash, and
//! output hashes, written as deterministic JSON under the output directory.
//!
//! Stages check their upstream artifacts against the recorded hashes and warn
//! when an input changed after its producing stage last ran.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageEntry>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageEntry {
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(out_dir: &Path) -> Result<Manifest> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
    }

    /// Records a completed stage and persists the manifest.
    pub fn record_stage(
        &mut self,
        out_dir: &Path,
        stage: &str,
        config_hash: String,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        meta: BTreeMap<String, String>,
    ) -> Result<()> {
        let mut entry = StageEntry { config_hash, meta, ..Default::default() };
        for path in inputs {
            entry.inputs.insert(display_key(out_dir, path), hash_file(path)?);
        }
        for path in outputs {
            entry.outputs.insert(display_key(out_dir, path), hash_file(path)?);
        }
        self.stages.insert(stage.to_string(), entry);
        self.save(out_dir)
    }

    /// Warns when an upstream artifact no longer matches the hash its
    /// producing stage recorded (a stale or externally modified artifact).
    pub fn check_freshness(&self, out_dir: &Path, producer: &str, artifact: &Path) -> Result<()> {
        let Some(entry) = self.stages.get(producer) else {
            return Ok(());
        };
        let key = display_key(out_dir, artifact);
        if let Some(recorded) = entry.outputs.get(&key) {
            let current = hash_file(artifact)?;
            if *recorded != current {
                log::warn!(
                    "{key} changed since the {producer} stage ran; rerun `coreperi {producer}` \
                     to refresh it"
                );
            }
        }
        Ok(())
    }
}

fn display_key(out_dir: &Path, path: &Path) -> String {
    path.strip_prefix(out_dir).unwrap_or(path).display().to_string()
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot hash {}", path.display()))?;
    Ok(hash_bytes(&bytes))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(7 + digest.len() * 2);
    out.push_str("sha256:");
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Errors out with an actionable message when a required artifact is missing.
pub fn require_artifact(path: &Path, producer: &str) -> Result<()> {
    if !path.exists() {
        anyhow::bail!(
            "missing artifact {}; run `coreperi {producer}` first",
            path.display()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_freshness() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let artifact = out.join("a.txt");
        fs::write(&artifact, "hello").unwrap();

        let mut manifest = Manifest::default();
        manifest
            .record_stage(out, "extract", "sha256:cfg".into(), &[], &[artifact.clone()], Default::default())
            .unwrap();
        let loaded = Manifest::load(out).unwrap();
        assert_eq!(loaded.stages["extract"].outputs.len(), 1);
        loaded.check_freshness(out, "extract", &artifact).unwrap();

        fs::write(&artifact, "changed").unwrap();
        // only warns; not an error
        loaded.check_freshness(out, "extract", &artifact).unwrap();
    }

    #[test]
    fn hashing_is_stable() {
        assert_eq!(hash_bytes(b"x"), hash_bytes(b"x"));
        assert_ne!(hash_bytes(b"x"), hash_bytes(b"y"));
        assert!(hash_bytes(b"x").starts_with("sha256:"));
    }

    #[test]
    fn missing_artifact_names_producer() {
        let err = require_artifact(Path::new("/nonexistent/x.csv"), "build-net").unwrap_err();
        assert!(err.to_string().contains("coreperi build-net"));
    }
}
