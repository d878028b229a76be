//! Run manifests: a small text record of what a command did, written next
//! to its outputs. Re-running the same command must reproduce the listed
//! digests (only `elapsed_ms` may differ).

use std::fmt::Write as _;
use std::path::Path;

use rejopt_core::{Error, Result};
use sha2::{Digest, Sha256};

pub struct Manifest {
    command: &'static str,
    base_seed: u64,
    elapsed_ms: u128,
    /// (file name, sha256 hex) per output, in write order.
    digests: Vec<(String, String)>,
    /// Resolved parameters (or the verbatim config file) echoed back.
    config_echo: String,
}

impl Manifest {
    pub fn new(command: &'static str, base_seed: u64, config_echo: String) -> Self {
        Self { command, base_seed, elapsed_ms: 0, digests: Vec::new(), config_echo }
    }

    pub fn set_elapsed(&mut self, elapsed: std::time::Duration) {
        self.elapsed_ms = elapsed.as_millis();
    }

    /// Records the digest of an already written output file.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let name = path
            .file_name()
            .ok_or_else(|| Error::InvalidParam(format!("not a file path: {}", path.display())))?
            .to_string_lossy()
            .into_owned();
        self.digests.push((name, format!("{:x}", Sha256::digest(&bytes))));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("rejopt-manifest v1\n");
        let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "base_seed = {}", self.base_seed);
        let _ = writeln!(out, "elapsed_ms = {}", self.elapsed_ms);
        for (name, hex) in &self.digests {
            let _ = writeln!(out, "digest = {name} sha256:{hex}");
        }
        out.push_str("begin config\n");
        out.push_str(&self.config_echo);
        if !self.config_echo.ends_with('\n') && !self.config_echo.is_empty() {
            out.push('\n');
        }
        out.push_str("end config\n");
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
