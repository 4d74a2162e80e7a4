use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiments::RunLog;

/// Fields that vary between otherwise identical runs start with this prefix.
pub const RUNTIME_PREFIX: &str = "runtime.";
const CONFIG_KEY: &str = "config_line";

/// Line-delimited `key = value` record of one run. The configuration is
/// embedded line by line so the run can be replayed from the manifest alone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        let mut m = Self::default();
        m.push("format", "1");
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m.push("config_hash", &cfg.hash());
        m.push("seed", &cfg.sweep.seed.to_string());
        m.push("replications", &cfg.sweep.replications.to_string());
        m
    }

    pub fn push(&mut self, key: &str, value: &str) {
        debug_assert!(!key.contains(" = ") && !value.contains('\n'));
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn push_log(&mut self, log: &RunLog) {
        for (k, v) in log.entries() {
            self.push(&format!("diag.{k}"), &format!("{v:e}"));
        }
    }

    pub fn push_config(&mut self, cfg: &ExperimentConfig) {
        for line in cfg.to_toml().lines() {
            self.push(CONFIG_KEY, line);
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Entries without the runtime fields.
    pub fn comparable(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .filter(|(k, _)| !k.starts_with(RUNTIME_PREFIX))
            .cloned()
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .or_else(|| line.strip_suffix(" =").map(|k| (k, "")))
                .ok_or_else(|| Error::Parse(format!("manifest line {}: no ` = ` separator", i + 1)))?;
            m.entries.push((k.to_string(), v.to_string()));
        }
        if m.get("format").is_none() {
            return Err(Error::Parse("not a run manifest".into()));
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The embedded configuration; its hash must match `config_hash`.
    pub fn config(&self) -> Result<ExperimentConfig> {
        let text: Vec<&str> = self
            .entries
            .iter()
            .filter(|(k, _)| k == CONFIG_KEY)
            .map(|(_, v)| v.as_str())
            .collect();
        if text.is_empty() {
            return Err(Error::Parse("manifest embeds no configuration".into()));
        }
        let cfg = ExperimentConfig::from_toml(&text.join("\n"))?;
        if let Some(h) = self.get("config_hash") {
            if h != cfg.hash() {
                return Err(Error::Parse("embedded configuration does not match its hash".into()));
            }
        }
        Ok(cfg)
    }

    /// `(file name, sha256)` of every recorded output.
    pub fn outputs(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("output.").map(|f| (f.to_string(), v.clone())))
            .collect()
    }
}

/// Write the manifest to `path`.
pub fn emit_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, manifest.to_text()).map_err(|e| Error::io(path, e))
}
