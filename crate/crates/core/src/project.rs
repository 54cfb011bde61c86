//! Project configuration: criteria bindings, controller and robot
//! changesets and graph targets.
//!
//! A project is a directory with an optional `config/` holding
//! `criteria.yaml`, `controllers.yaml`, `robots.yaml` and `graphs.yaml`.
//! It is found as a `type: project` plugin with the project name as id,
//! else as `./<name>`. Without a directory the built-in defaults for the
//! reference platform apply.
//!
//! `controllers.yaml` and `robots.yaml` map names to changesets:
//!
//! ```yaml
//! foraging.alpha:
//!   all:
//!     - {op: set_attr, path: /refsim/agents, name: policy, value: alpha}
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::criteria::{CriteriaBindings, ParserRegistry};
use crate::deliverables::{refsim_graphs, GraphConfig};
use crate::error::{Error, Result};
use crate::expgen::ExtraChanges;
use crate::fsutil;
use crate::plugin::{PluginPath, PluginType};

#[derive(Debug, Clone, Default)]
pub struct Project {
    pub name: String,
    pub dir: Option<PathBuf>,
    pub criteria: CriteriaBindings,
    pub controllers: BTreeMap<String, ExtraChanges>,
    pub robots: BTreeMap<String, ExtraChanges>,
    pub graphs: GraphConfig,
}

fn optional_yaml<T: serde::de::DeserializeOwned + Default>(path: &Path) -> Result<T> {
    if path.is_file() {
        fsutil::read_yaml(path)
    } else {
        Ok(T::default())
    }
}

impl Project {
    pub fn locate(name: &str, plugin_path: &PluginPath) -> Result<Option<PathBuf>> {
        if let Some(found) = plugin_path.find(PluginType::Project, name)? {
            return Ok(Some(found.dir));
        }
        let local = PathBuf::from(name);
        Ok(local.is_dir().then_some(local))
    }

    pub fn load(name: &str, plugin_path: &PluginPath) -> Result<Self> {
        match Self::locate(name, plugin_path)? {
            Some(dir) => Self::from_dir(name, &dir),
            None => {
                log::info!("project '{name}' not found on the plugin path; using built-in defaults");
                Ok(Project {
                    name: name.into(),
                    graphs: refsim_graphs(),
                    ..Default::default()
                })
            }
        }
    }

    pub fn from_dir(name: &str, dir: &Path) -> Result<Self> {
        let cfg = dir.join("config");
        let mut criteria = CriteriaBindings::default();
        let criteria_path = cfg.join("criteria.yaml");
        if criteria_path.is_file() {
            criteria.merge(fsutil::read_yaml(&criteria_path)?);
        }
        let graphs_path = cfg.join("graphs.yaml");
        let graphs = if graphs_path.is_file() {
            GraphConfig::load(&graphs_path)?
        } else {
            refsim_graphs()
        };
        Ok(Project {
            name: name.into(),
            dir: Some(dir.to_path_buf()),
            criteria,
            controllers: optional_yaml(&cfg.join("controllers.yaml"))?,
            robots: optional_yaml(&cfg.join("robots.yaml"))?,
            graphs,
        })
    }

    pub fn registry(&self, plugin_path: &PluginPath) -> Result<ParserRegistry> {
        let mut reg = ParserRegistry::with_bindings(&self.criteria);
        reg.load_plugins(plugin_path)?;
        Ok(reg)
    }

    /// Changes for `--controller`/`--robot`. A name missing from the
    /// project maps to no changes when the project defines none at all.
    pub fn extra_changes(&self, controller: Option<&str>, robot: Option<&str>) -> Result<ExtraChanges> {
        let mut extra = ExtraChanges::default();
        for (what, name, table) in [
            ("controller", controller, &self.controllers),
            ("robot", robot, &self.robots),
        ] {
            let Some(name) = name else { continue };
            match table.get(name) {
                Some(cs) => extra.merge(cs),
                None if table.is_empty() => {
                    log::info!("project '{}' defines no {what}s; '{name}' is recorded only", self.name)
                }
                None => {
                    return Err(Error::Config(format!(
                        "unknown {what} '{name}' (project '{}' defines: {})",
                        self.name,
                        table.keys().cloned().collect::<Vec<_>>().join(", ")
                    )))
                }
            }
        }
        Ok(extra)
    }
}
