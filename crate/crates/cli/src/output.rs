use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Collects the files a command writes into its output directory.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
    pub plots: bool,
}

impl OutDir {
    pub fn create(dir: &Path, plots: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new(), plots })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p.display().to_string(), e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(name, e))?;
        s.push('\n');
        self.write(name, s)
    }

    pub fn svg(&mut self, name: &str, svg: String) -> Result<(), CliError> {
        if self.plots { self.write(name, svg) } else { Ok(()) }
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Reproducibility record written next to every command's outputs.
#[derive(Serialize)]
pub struct RunRecord<'a, A: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub strict: bool,
    pub lax_columns: bool,
    pub args: &'a A,
    /// Input path → SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub warnings: &'a [String],
}

pub fn digests(paths: &[&Path]) -> Result<BTreeMap<String, String>, CliError> {
    paths.iter().map(|p| Ok((p.display().to_string(), sha256_file(p)?))).collect()
}

/// Sanitizes a tag for use inside a file name.
pub fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
