//! Platform descriptors.
//!
//! A platform is described by a manifest: how to launch one run, where the
//! seed and experiment length go in the XML input, and which output files
//! a run produces. Resolution only reads manifests; no plugin code runs.

use serde::{Deserialize, Serialize};

use crate::criteria::AttrTarget;
use crate::error::{Error, Result};
use crate::expgen::ExpSetup;
use crate::plugin::{PluginPath, PluginType};
use crate::xml::{AttributeChangeSet, Change};

/// Where experiment length and controller rate are written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBinding {
    pub path: String,
    /// Receives duration_s * hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ticks_attr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_attr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hz_attr: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDecl {
    /// Stems of per-run tables, read as `<output_dir>/<stem>.csv`.
    #[serde(default)]
    pub tables: Vec<String>,
    /// Stems of snapshot matrices, read as `<output_dir>/<stem>.<k>.csv`.
    #[serde(default)]
    pub snapshots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformPlugin {
    pub id: String,
    /// Shell command with `{input}` and `{seed}` placeholders.
    pub launch_template: String,
    pub seed: AttrTarget,
    pub default_hz: u32,
    pub time: TimeBinding,
    pub outputs: OutputDecl,
    /// Run-relative directory holding outputs.
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// Changes enabling frame capture, applied with `--platform-vc`.
    #[serde(default)]
    pub vc_hooks: AttributeChangeSet,
}

fn default_output_dir() -> String {
    "output".to_string()
}

pub const REFSIM_ID: &str = "platform.refsim";

impl PlatformPlugin {
    pub fn refsim() -> Self {
        PlatformPlugin {
            id: REFSIM_ID.to_string(),
            launch_template: "refsim --input {input} --seed {seed}".to_string(),
            seed: AttrTarget::new("/refsim/seed", "value"),
            default_hz: 10,
            time: TimeBinding {
                path: "/refsim/time".to_string(),
                ticks_attr: Some("ticks".to_string()),
                duration_attr: None,
                hz_attr: None,
            },
            outputs: OutputDecl {
                tables: vec!["collected".to_string()],
                snapshots: vec!["spatial".to_string()],
            },
            output_dir: default_output_dir(),
            vc_hooks: AttributeChangeSet(vec![Change::set_attr("/refsim/arena", "capture", "frames")]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Error::Plugin(format!("platform '{}': {msg}", self.id));
        for placeholder in ["{input}", "{seed}"] {
            let n = self.launch_template.matches(placeholder).count();
            if n != 1 {
                return Err(bad(format!(
                    "launch_template must contain {placeholder} exactly once (found {n})"
                )));
            }
        }
        if self.outputs.tables.is_empty() && self.outputs.snapshots.is_empty() {
            return Err(bad("no output stems declared".into()));
        }
        if self.outputs.tables.iter().chain(&self.outputs.snapshots).any(|s| s.is_empty()) {
            return Err(bad("empty output stem".into()));
        }
        if self.default_hz == 0 {
            return Err(bad("default_hz must be positive".into()));
        }
        let t = &self.time;
        if t.ticks_attr.is_none() && t.duration_attr.is_none() {
            return Err(bad("time binding needs ticks_attr or duration_attr".into()));
        }
        Ok(())
    }

    pub fn launch_command(&self, input: &str, seed: u64) -> String {
        self.launch_template
            .replace("{input}", input)
            .replace("{seed}", &seed.to_string())
    }

    /// Changes writing the experiment length and controller rate.
    pub fn setup_changes(&self, setup: &ExpSetup) -> AttributeChangeSet {
        let hz = setup.controller_hz.unwrap_or(self.default_hz) as u64;
        let path = &self.time.path;
        let mut cs = AttributeChangeSet::new();
        if let Some(a) = &self.time.ticks_attr {
            cs.push(Change::set_attr(path, a, (setup.duration_s * hz).to_string()));
        }
        if let Some(a) = &self.time.duration_attr {
            cs.push(Change::set_attr(path, a, setup.duration_s.to_string()));
        }
        if let Some(a) = &self.time.hz_attr {
            cs.push(Change::set_attr(path, a, hz.to_string()));
        }
        cs
    }

    pub fn seed_change(&self, seed: u64) -> Change {
        Change::set_attr(&self.seed.path, &self.seed.attr, seed.to_string())
    }
}

pub fn builtin_platform(id: &str) -> Option<PlatformPlugin> {
    match id {
        REFSIM_ID => Some(PlatformPlugin::refsim()),
        _ => None,
    }
}

/// Built-ins first, then plugin path entries in order.
pub fn resolve_platform(id: &str, plugin_path: &PluginPath) -> Result<PlatformPlugin> {
    if let Some(p) = builtin_platform(id) {
        return Ok(p);
    }
    let found = plugin_path.find(PluginType::Platform, id)?.ok_or_else(|| {
        Error::Plugin(format!(
            "platform '{id}' not found (built-ins: {REFSIM_ID}; plugin path: {})",
            plugin_path.describe()
        ))
    })?;
    let plugin: PlatformPlugin = found.load().map_err(|e| {
        Error::Plugin(format!(
            "schema error in {}: {e}",
            found.manifest_path().display()
        ))
    })?;
    plugin.validate()?;
    Ok(plugin)
}
