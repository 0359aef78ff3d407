use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Config hash and seed stamped on every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    fn csv_header(&self) -> String {
        format!("# config_hash={}, seed={}\n", self.config_hash, self.seed)
    }
}

/// In-memory output files keyed by relative path. Nothing touches the disk
/// until [`ArtifactSet::write_to`].
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactSet {
    provenance: Provenance,
    files: BTreeMap<String, String>,
    notes: Vec<String>,
}

impl ArtifactSet {
    pub fn new(provenance: Provenance) -> Self {
        ArtifactSet {
            provenance,
            files: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Add a CSV body (header row first); the provenance comment is prepended.
    pub fn add_csv(&mut self, name: &str, body: &str) {
        let text = format!("{}{body}", self.provenance.csv_header());
        self.files.insert(name.to_string(), text);
    }

    /// Add a JSON document as `{"provenance": ..., "data": value}`.
    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let doc = json!({
            "provenance": self.provenance,
            "data": serde_json::to_value(value)?,
        });
        self.files
            .insert(name.to_string(), serde_json::to_string_pretty(&doc)? + "\n");
        Ok(())
    }

    /// Record a human-readable remark (dropped symbols, skipped windows, ...)
    /// for the manifest.
    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// `manifest.json`: every artifact with its config hash and content digest.
    pub fn manifest(&self, extra: Value) -> Result<String> {
        let artifacts: Vec<Value> = self
            .files
            .iter()
            .map(|(name, text)| {
                json!({
                    "path": name,
                    "config_hash": self.provenance.config_hash,
                    "sha256": hex::encode(Sha256::digest(text.as_bytes())),
                })
            })
            .collect();
        let doc = json!({
            "provenance": self.provenance,
            "run": extra,
            "notes": self.notes,
            "artifacts": artifacts,
        });
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Write every artifact below `dir`, creating directories as needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        for (name, text) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// `f64` for CSV: empty for missing.
pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Two-column CSV with the given header.
pub(crate) fn series_csv<K: std::fmt::Display>(header: &str, rows: impl IntoIterator<Item = (K, Option<f64>)>) -> String {
    let mut out = format!("{header}\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{}\n", fmt_opt(v)));
    }
    out
}
