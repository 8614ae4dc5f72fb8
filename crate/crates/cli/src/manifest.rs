//! Provenance records written beside every output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mkr::MkrError;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub settings: BTreeMap<String, String>,
    pub inputs: Vec<InputHash>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            settings: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.settings.insert(key.to_string(), value.to_string());
        self
    }

    /// Records every `key=value` line of a rendered config.
    pub fn settings_from_text(&mut self, text: &str) -> &mut Self {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.setting(k, v);
            }
        }
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, MkrError> {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: hash_file(path)?,
        });
        Ok(self)
    }

    /// Hashes the data files of a bundle directory in name order.
    pub fn input_dir(&mut self, dir: &Path) -> Result<&mut Self, MkrError> {
        let mut files: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
            .collect();
        files.sort();
        for f in files {
            self.input(&f)?;
        }
        Ok(self)
    }

    pub fn write(&self, dir: &Path) -> Result<(), MkrError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn hash_file(path: &Path) -> Result<String, MkrError> {
    let bytes = fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}
