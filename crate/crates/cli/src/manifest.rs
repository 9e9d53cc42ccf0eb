//! Bundle manifest: seeds plus a SHA-256 checksum for every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub grid: usize,
    pub n: usize,
    pub train_scale: f64,
    pub seeds: BTreeMap<String, u64>,
    /// File name (relative to the bundle) → hex digest.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("no bundle manifest at {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Hashes `dir/name` and records it.
    pub fn record(&mut self, dir: &Path, name: &str) -> Result<()> {
        let digest = sha256_file(&dir.join(name))?;
        self.files.insert(name.to_owned(), digest);
        Ok(())
    }

    pub fn has(&self, name: &str) -> bool {
        self.files.contains_key(name)
    }

    /// Fails on the first listed file that is missing or whose contents changed.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (name, expected) in &self.files {
            let actual = sha256_file(&dir.join(name))
                .with_context(|| format!("bundle file {name} is listed in the manifest"))?;
            if &actual != expected {
                bail!(
                    "checksum mismatch for {name}: manifest has {expected}, file hashes to {actual}; \
                     the bundle was modified after it was written"
                );
            }
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}
