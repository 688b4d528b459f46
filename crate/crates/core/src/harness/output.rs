use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// An output directory that writes files atomically and remembers them.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: BTreeSet<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: BTreeSet::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }

    /// Write through a temp file in the target directory, then rename.
    pub fn write(&mut self, relative: &str, contents: &str) -> Result<PathBuf> {
        let target = self.root.join(relative);
        let dir = target.parent().unwrap_or(&self.root).to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
        tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(&target, e))?;
        tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
        self.written.insert(relative.to_string());
        Ok(target)
    }

    pub fn files(&self) -> Vec<String> {
        self.written.iter().cloned().collect()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    seed: u64,
    files: Vec<String>,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Record the command, config hash, seed and produced files in `manifest.json`.
pub fn write_manifest(out: &mut OutputDir, command: &str, config_toml: &str, seed: u64) -> Result<()> {
    let manifest = Manifest {
        command,
        config_sha256: sha256_hex(config_toml),
        seed,
        files: out.files(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialize(e.to_string()))?;
    text.push('\n');
    out.write("manifest.json", &text)?;
    Ok(())
}
