//! Provenance records written next to every artifact.
//!
//! A manifest holds the tool version, the resolved configuration with its
//! SHA-256, the SHA-256 of every input file (keyed by file name) and
//! command-specific statistics. Nothing time- or host-dependent goes in, so
//! reruns produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub stats: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        let canonical = serde_json::to_string(config).expect("config serializes");
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            config_hash: sha256_hex(canonical.as_bytes()),
            inputs: BTreeMap::new(),
            stats: Value::Null,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.inputs.insert(name, hash_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `out.jsonl` -> `out.jsonl.manifest.json`
pub fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    name.into()
}
