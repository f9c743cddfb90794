//! Run directory handling: artifact writes with content checksums and the
//! run manifest.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// One row of the per-check table: `passed = None` marks a purely measured
/// quantity with no pass/fail semantics.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: Option<bool>,
    pub measured: f64,
    pub note: String,
}

impl CheckRow {
    pub fn gate(name: &str, passed: bool, measured: f64, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: Some(passed),
            measured,
            note: note.into(),
        }
    }

    pub fn info(name: &str, measured: f64, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: None,
            measured,
            note: note.into(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub artifacts: Vec<ArtifactEntry>,
    pub checks: Vec<CheckRow>,
    /// Wall-clock timings; excluded from determinism comparisons.
    pub timings_s: BTreeMap<String, f64>,
}

/// Artifact sink rooted at one run directory.
pub struct RunDir {
    root: PathBuf,
    artifacts: Vec<ArtifactEntry>,
    timings: BTreeMap<String, f64>,
    started: Instant,
}

impl RunDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&root)
            .with_context(|| format!("creating run dir {}", root.display()))?;
        Ok(Self {
            root,
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_artifact(&mut self, name: &str, contents: &str) -> Result<String> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("writing artifact {}", path.display()))?;
        let digest = Sha256::digest(contents.as_bytes());
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            sha256: format!("{digest:x}"),
            bytes: contents.len(),
        });
        Ok(name.to_string())
    }

    pub fn note_timing(&mut self, what: &str, seconds: f64) {
        self.timings.insert(what.to_string(), seconds);
    }

    /// Write `manifest.json` and return the manifest.
    pub fn finish(
        mut self,
        experiment: &str,
        config: BTreeMap<String, String>,
        checks: Vec<CheckRow>,
    ) -> Result<RunManifest> {
        self.timings
            .insert("total".to_string(), self.started.elapsed().as_secs_f64());
        let manifest = RunManifest {
            experiment: experiment.to_string(),
            config,
            artifacts: self.artifacts,
            checks,
            timings_s: self.timings,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(self.root.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

/// The manifest with volatile fields (timings) removed, for determinism
/// comparisons.
pub fn stable_view(manifest_json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(manifest_json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timings_s");
    }
    Ok(serde_json::to_string_pretty(&v)?)
}
