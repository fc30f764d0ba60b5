use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use translaw_core::pipeline::{DEFAULT_MAX_ROUNDS, DEFAULT_WORKERS};
use translaw_core::memory::DEFAULT_MAX_PNS_RADIUS;

use crate::ServerError;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

/// Server settings, usually read from a TOML file. Relative paths are
/// resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// Directory holding `tm.jsonl` and `pm.jsonl`; memory stays in-process
    /// when unset.
    pub data_dir: Option<PathBuf>,
    /// Provider registry file; the seeded registry is used when unset.
    pub providers: Option<PathBuf>,
    pub max_rounds: u32,
    pub max_pns_radius: usize,
    pub workers: usize,
    /// Directory of static assets served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Directory that corpus references in job requests resolve against.
    pub corpus_dir: Option<PathBuf>,
    /// Glossary name to TSV/CSV file.
    pub glossaries: BTreeMap<String, PathBuf>,
    /// Start jobs as soon as they are created.
    pub auto_start: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.into(),
            data_dir: None,
            providers: None,
            max_rounds: DEFAULT_MAX_ROUNDS,
            max_pns_radius: DEFAULT_MAX_PNS_RADIUS,
            workers: DEFAULT_WORKERS,
            static_dir: None,
            corpus_dir: None,
            glossaries: BTreeMap::new(),
            auto_start: true,
        }
    }
}

impl ServerConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ServerError> {
        toml::from_str(s).map_err(|e| ServerError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| ServerError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&content)?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative(base);
        }
        Ok(cfg)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.data_dir, &mut self.providers, &mut self.static_dir, &mut self.corpus_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        self.glossaries.values_mut().for_each(fix);
    }
}
