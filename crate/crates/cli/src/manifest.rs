//! Run manifests: the resolved config, the seeds in play, and content
//! hashes of the inputs. Enough to reproduce outputs byte-identically in
//! single-worker mode.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use elastmap_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

#[derive(Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub config: ExperimentConfig,
    /// Seeds the command actually consumed, by role.
    pub seeds: BTreeMap<&'static str, Value>,
    /// sha256 of each input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub workers: usize,
}

impl Manifest {
    pub fn new(command: &'static str, config: &ExperimentConfig) -> Manifest {
        Manifest {
            command,
            config: config.clone(),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            workers: elastmap_core::threads::worker_count(),
        }
    }

    pub fn seed(mut self, role: &'static str, value: impl Into<Value>) -> Manifest {
        self.seeds.insert(role, value.into());
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Manifest> {
        self.inputs
            .insert(path.display().to_string(), sha256_hex(path)?);
        Ok(self)
    }

    /// Writes `<command>_manifest.json` so commands sharing an output
    /// directory keep their provenance side by side.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("manifest: {e}")))?;
        let path = dir.join(format!("{}_manifest.json", self.command.replace('-', "_")));
        std::fs::write(&path, text + "\n")?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

/// Streaming sha256 of a file, lowercase hex.
pub fn sha256_hex(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}
