use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ebacktest::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Everything needed to reproduce a command's outputs. Contains no
/// timestamps, so identical runs give identical hashes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Input path to its sha256.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betting: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_bound: Option<f64>,
    pub params: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
            functional: None,
            level: None,
            betting: None,
            restart: None,
            seeds: Vec::new(),
            support_bound: None,
            params: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }

    fn bytes(&self) -> Result<Vec<u8>> {
        let mut b = serde_json::to_vec_pretty(self)?;
        b.push(b'\n');
        Ok(b)
    }

    /// `sha256:<hex>` of the serialized manifest.
    pub fn hash(&self) -> Result<String> {
        Ok(format!("sha256:{}", sha256_hex(&self.bytes()?)))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        fs::write(&path, self.bytes()?)?;
        Ok(path)
    }
}

/// JSON output stamped with the manifest hash.
#[derive(Serialize)]
pub struct Stamped<'a, T: Serialize> {
    pub manifest: &'a str,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_json<T: Serialize>(path: &Path, manifest: &str, body: T) -> Result<()> {
    let mut b = serde_json::to_vec_pretty(&Stamped { manifest, body })?;
    b.push(b'\n');
    fs::write(path, b)?;
    Ok(())
}
