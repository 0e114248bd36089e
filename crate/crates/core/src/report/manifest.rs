use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Registry of everything a run wrote, stored as `manifest.json` in the run
/// directory. Paths are relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub seed: u64,
    pub configs: BTreeMap<String, String>,
    pub files: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub stop_reason: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(seed: u64) -> Self {
        let started = now();
        RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            run_id: format!("run-{seed}-{started}"),
            seed,
            configs: BTreeMap::new(),
            files: Vec::new(),
            started_unix: started,
            finished_unix: None,
            stop_reason: None,
            warnings: Vec::new(),
        }
    }

    pub fn register_config(&mut self, name: &str, rel: &str) {
        self.configs.insert(name.to_string(), rel.to_string());
        self.register(rel);
    }

    /// Adds a file, keeping the registry sorted and free of duplicates.
    pub fn register(&mut self, rel: &str) {
        let rel = rel.replace('\\', "/");
        if let Err(at) = self.files.binary_search(&rel) {
            self.files.insert(at, rel);
        }
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
    }

    pub fn finish(&mut self, stop_reason: &str) {
        self.finished_unix = Some(now());
        self.stop_reason = Some(stop_reason.to_string());
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported manifest schema version {}",
                path.display(),
                m.schema_version
            )));
        }
        Ok(m)
    }

    /// Fails on the first registered file that does not exist.
    pub fn validate(&self, run_dir: &Path) -> Result<()> {
        match self.files.iter().find(|f| !run_dir.join(f).is_file()) {
            Some(f) => Err(Error::Data(format!("manifest lists missing file {f}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::start(7);
        fs::write(dir.path().join("config.json"), "{}").unwrap();
        m.register_config("training", "config.json");
        m.register("config.json");
        m.warn("skipped empty chart");
        m.finish("done");
        m.save(dir.path()).unwrap();
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.files, ["config.json"]);
        back.validate(dir.path()).unwrap();
        m.register("metrics/missing.csv");
        assert!(m.validate(dir.path()).is_err());
    }
}
