//! Plugin discovery on `XBATCH_PLUGIN_PATH`.
//!
//! Each path entry is a directory. A plugin is a directory (the entry
//! itself or one of its immediate subdirectories) containing a
//! `plugin.yaml` manifest with at least `type` and `id` keys. Nothing is
//! executed during discovery.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fsutil;

pub const PLUGIN_PATH_VAR: &str = "XBATCH_PLUGIN_PATH";
pub const MANIFEST_NAME: &str = "plugin.yaml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PluginType {
    Criteria,
    Platform,
    Model,
    Storage,
    Project,
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestHeader {
    #[serde(rename = "type")]
    kind: PluginType,
    id: String,
}

/// A manifest found on the plugin path.
#[derive(Debug, Clone)]
pub struct FoundPlugin {
    pub kind: PluginType,
    pub id: String,
    pub dir: PathBuf,
}

impl FoundPlugin {
    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_NAME)
    }

    /// Deserializes the full manifest into a plugin-specific schema.
    pub fn load<T: DeserializeOwned>(&self) -> Result<T> {
        fsutil::read_yaml(&self.manifest_path())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PluginPath {
    pub dirs: Vec<PathBuf>,
}

impl PluginPath {
    pub fn new(dirs: Vec<PathBuf>) -> Self {
        PluginPath { dirs }
    }

    /// Parses a colon-separated list; empty entries are skipped.
    pub fn parse(value: &str) -> Self {
        PluginPath {
            dirs: value
                .split(':')
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
                .collect(),
        }
    }

    pub fn from_env() -> Self {
        std::env::var(PLUGIN_PATH_VAR)
            .map(|v| Self::parse(&v))
            .unwrap_or_default()
    }

    /// All manifests of the given type, in search order.
    pub fn discover(&self, kind: PluginType) -> Result<Vec<FoundPlugin>> {
        let mut found = Vec::new();
        for dir in &self.dirs {
            for candidate in candidates(dir) {
                let manifest = candidate.join(MANIFEST_NAME);
                if !manifest.is_file() {
                    continue;
                }
                let header: ManifestHeader = fsutil::read_yaml(&manifest).map_err(|e| {
                    Error::Plugin(format!("invalid manifest {}: {e}", manifest.display()))
                })?;
                if header.kind == kind {
                    found.push(FoundPlugin {
                        kind,
                        id: header.id,
                        dir: candidate,
                    });
                }
            }
        }
        Ok(found)
    }

    /// First plugin of `kind` whose id matches.
    pub fn find(&self, kind: PluginType, id: &str) -> Result<Option<FoundPlugin>> {
        Ok(self.discover(kind)?.into_iter().find(|p| p.id == id))
    }

    pub fn describe(&self) -> String {
        if self.dirs.is_empty() {
            return "<empty>".to_string();
        }
        self.dirs
            .iter()
            .map(|d| d.display().to_string())
            .collect::<Vec<_>>()
            .join(":")
    }
}

fn candidates(dir: &Path) -> Vec<PathBuf> {
    let mut out = vec![dir.to_path_buf()];
    if let Ok(entries) = fs::read_dir(dir) {
        let mut subdirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        out.extend(subdirs);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_skips_empty_entries() {
        let p = PluginPath::parse("/a::/b:");
        assert_eq!(p.dirs, vec![PathBuf::from("/a"), PathBuf::from("/b")]);
    }

    #[test]
    fn discovers_by_type_in_order() {
        let tmp = tempfile::tempdir().unwrap();
        let first = tmp.path().join("one");
        let second = tmp.path().join("two");
        for (root, id) in [(&first, "x"), (&second, "x")] {
            fs::create_dir_all(root.join("p")).unwrap();
            fs::write(root.join("p/plugin.yaml"), format!("type: criteria\nid: {id}\n")).unwrap();
        }
        fs::create_dir_all(first.join("q")).unwrap();
        fs::write(first.join("q/plugin.yaml"), "type: model\nid: m\n").unwrap();

        let path = PluginPath::new(vec![first.clone(), second]);
        let found = path.discover(PluginType::Criteria).unwrap();
        assert_eq!(found.len(), 2);
        assert_eq!(found[0].dir, first.join("p"));
        assert!(path.find(PluginType::Model, "m").unwrap().is_some());
        assert!(path.find(PluginType::Model, "nope").unwrap().is_none());
    }
}
