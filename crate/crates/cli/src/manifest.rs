use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use zrfl_core::digest::{config_digest, hex_digest};

/// Effective configuration of one run. The digest covers the command, the tool version, the
/// parameters and the content of every input file.
#[derive(Serialize)]
pub struct RunConfig<'a, P: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub params: &'a P,
    /// SHA-256 of each input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub digest: String,
    /// Facts about the run that are not inputs, such as item counts or early stopping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<serde_json::Value>,
}

impl<'a, P: Serialize> RunConfig<'a, P> {
    pub fn new(command: &'static str, params: &'a P, inputs: &[&Path]) -> Result<Self> {
        let mut hashes = BTreeMap::new();
        for path in inputs {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            hashes.insert(path.display().to_string(), hex_digest(&bytes));
        }
        let version = env!("CARGO_PKG_VERSION");
        let digest = config_digest(&(command, version, params, &hashes));
        let config = RunConfig {
            command,
            version,
            params,
            inputs: hashes,
            digest,
            outcome: None,
        };
        eprintln!("run config: {}", serde_json::to_string(&config)?);
        Ok(config)
    }

    /// Writes `<out>.manifest.json`.
    pub fn write_next_to(&self, out: &Path) -> Result<PathBuf> {
        let path = manifest_path(out);
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
