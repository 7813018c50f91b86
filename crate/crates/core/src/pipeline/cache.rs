//! Content-addressed stage stamps.
//!
//! A stage's key hashes its name, its configuration, the bytes of every
//! input file it reads and the keys of the stages it depends on. A stage is
//! skipped when its stamp carries the same key and all recorded outputs are
//! still present with unchanged content.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hydrodata::io::{read_json, write_json};

pub const STAMP_FILE: &str = ".stage.json";

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hash_bytes(&bytes))
}

/// Incrementally built stage key.
#[derive(Debug, Clone)]
pub struct KeyBuilder {
    hasher: Sha256,
}

impl KeyBuilder {
    pub fn new(stage: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"stage\0");
        hasher.update(stage.as_bytes());
        Self { hasher }
    }

    fn field(&mut self, tag: &str, bytes: &[u8]) {
        self.hasher.update(tag.as_bytes());
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn config<T: Serialize>(mut self, name: &str, value: &T) -> Result<Self> {
        let json = serde_json::to_vec(value)?;
        self.field(&format!("config:{name}"), &json);
        Ok(self)
    }

    /// Adds a file's content hash under a label that does not depend on
    /// where the data directory lives.
    pub fn file(mut self, label: &str, path: &Path) -> Result<Self> {
        let h = hash_file(path)?;
        self.field(&format!("file:{label}"), h.as_bytes());
        Ok(self)
    }

    pub fn upstream(mut self, key: &str) -> Self {
        self.field("upstream", key.as_bytes());
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub stage: String,
    pub key: String,
    /// Output path relative to the stage directory -> content hash.
    pub outputs: BTreeMap<String, String>,
}

impl Stamp {
    pub fn read(dir: &Path) -> Option<Stamp> {
        let p = dir.join(STAMP_FILE);
        p.exists().then(|| read_json(&p).ok()).flatten()
    }

    /// True when the stamp matches `key` and every output is intact.
    pub fn is_valid(&self, dir: &Path, key: &str) -> bool {
        self.key == key
            && self
                .outputs
                .iter()
                .all(|(rel, h)| hash_file(&dir.join(rel)).map(|x| &x == h).unwrap_or(false))
    }

    /// Records every regular file below `dir` except the stamp itself.
    pub fn write(dir: &Path, stage: &str, key: &str) -> Result<Stamp> {
        let mut outputs = BTreeMap::new();
        for rel in list_files(dir)? {
            let s = rel.to_string_lossy().replace('\\', "/");
            if s == STAMP_FILE {
                continue;
            }
            outputs.insert(s, hash_file(&dir.join(&rel))?);
        }
        let stamp = Stamp { stage: stage.into(), key: key.into(), outputs };
        write_json(&dir.join(STAMP_FILE), &stamp)?;
        Ok(stamp)
    }
}

/// Relative paths of all files below `dir`, sorted.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in rd {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let p = entry.path();
            if p.is_dir() {
                walk(base, &p, out)?;
            } else {
                out.push(p.strip_prefix(base).expect("below base").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if dir.exists() {
        walk(dir, dir, &mut out)?;
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_every_component() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("in.txt");
        std::fs::write(&f, "a").unwrap();
        let k = |stage: &str, cfg: u32, up: &str| {
            KeyBuilder::new(stage).config("c", &cfg).unwrap().file("in", &f).unwrap().upstream(up).finish()
        };
        let base = k("s", 1, "u");
        assert_eq!(base, k("s", 1, "u"));
        assert_ne!(base, k("t", 1, "u"));
        assert_ne!(base, k("s", 2, "u"));
        assert_ne!(base, k("s", 1, "v"));
        std::fs::write(&f, "b").unwrap();
        assert_ne!(base, k("s", 1, "u"));
    }

    #[test]
    fn stamp_detects_modified_outputs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/out.csv"), "1").unwrap();
        let s = Stamp::write(dir.path(), "x", "k").unwrap();
        assert_eq!(s.outputs.len(), 1);
        let back = Stamp::read(dir.path()).unwrap();
        assert!(back.is_valid(dir.path(), "k"));
        assert!(!back.is_valid(dir.path(), "other"));
        std::fs::write(dir.path().join("sub/out.csv"), "2").unwrap();
        assert!(!back.is_valid(dir.path(), "k"));
    }
}
