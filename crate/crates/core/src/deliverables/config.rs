//! Graph configuration (`graphs.yaml`).
//!
//! ```yaml
//! targets:
//!   - id: collected-vs-size
//!     kind: linegraph          # linegraph | heatmap | video
//!     scope: inter_exp         # intra_exp | inter_exp
//!     stem: collected
//!     columns: [collected]
//!     title: Objects collected
//!     x_label: Swarm size
//!     y_label: Objects
//!     x_scale: log2            # optional; geometric axes default to log2
//!     models:
//!       - id: model.constant
//!         params: {value: 10}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::doc::Scale;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Linegraph,
    Heatmap,
    Video,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    IntraExp,
    InterExp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRef {
    pub id: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_yaml::Value>,
}

impl ModelRef {
    /// `id` or `id:value`; the value becomes the `value` parameter.
    pub fn parse_cli(raw: &str) -> Result<Self> {
        let (id, value) = match raw.split_once(':') {
            Some((id, v)) => (id, Some(v)),
            None => (raw, None),
        };
        if id.is_empty() {
            return Err(Error::Usage(format!("bad model reference '{raw}'")));
        }
        let mut params = BTreeMap::new();
        if let Some(v) = value {
            let parsed: serde_yaml::Value =
                serde_yaml::from_str(v).unwrap_or_else(|_| serde_yaml::Value::String(v.into()));
            params.insert("value".to_string(), parsed);
        }
        Ok(ModelRef {
            id: id.to_string(),
            params,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphTarget {
    pub id: String,
    pub kind: TargetKind,
    pub scope: Scope,
    pub stem: String,
    #[serde(default)]
    pub columns: Vec<String>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub x_label: Option<String>,
    #[serde(default)]
    pub y_label: Option<String>,
    #[serde(default)]
    pub x_scale: Option<Scale>,
    #[serde(default)]
    pub y_scale: Option<Scale>,
    /// Snapshot index for intra-experiment heatmaps; the last one if unset.
    #[serde(default)]
    pub frame: Option<usize>,
    #[serde(default)]
    pub models: Vec<ModelRef>,
}

impl GraphTarget {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("graph target '{}': {m}", self.id)));
        if self.stem.is_empty() {
            return bad("stem is empty");
        }
        match (self.kind, self.scope) {
            (TargetKind::Linegraph, _) if self.columns.is_empty() => bad("linegraph needs columns"),
            (TargetKind::Heatmap, Scope::InterExp) if self.columns.len() != 1 => {
                bad("inter_exp heatmap needs exactly one column")
            }
            (TargetKind::Video, Scope::InterExp) => bad("video targets are intra_exp only"),
            (TargetKind::Heatmap | TargetKind::Video, _) if !self.models.is_empty() => {
                bad("models overlay linegraphs only")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphConfig {
    pub targets: Vec<GraphTarget>,
}

impl GraphConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let yaml_err = |m: String| Error::Config(format!("{}: {m}", origin.display()));
        let value: serde_yaml::Value =
            serde_yaml::from_str(text).map_err(|e| yaml_err(e.to_string()))?;
        let map = match value {
            serde_yaml::Value::Null => return Ok(GraphConfig::default()),
            serde_yaml::Value::Mapping(m) => m,
            _ => return Err(yaml_err("expected a mapping with a 'targets' list".into())),
        };
        let mut targets = Vec::new();
        for (k, v) in map {
            match k.as_str() {
                Some("targets") => {
                    let list = match v {
                        serde_yaml::Value::Null => Vec::new(),
                        serde_yaml::Value::Sequence(s) => s,
                        _ => return Err(yaml_err("'targets' must be a list".into())),
                    };
                    for (i, item) in list.into_iter().enumerate() {
                        let id = item
                            .get("id")
                            .and_then(|v| v.as_str())
                            .map_or_else(|| format!("#{i}"), str::to_string);
                        let t: GraphTarget = serde_yaml::from_value(item)
                            .map_err(|e| Error::Config(format!("graph target '{id}': {e}")))?;
                        targets.push(t);
                    }
                }
                other => log::warn!(
                    "{}: ignoring unknown key {:?}",
                    origin.display(),
                    other.unwrap_or("<non-string>")
                ),
            }
        }
        let cfg = GraphConfig { targets };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.targets {
            if !seen.insert(t.id.as_str()) {
                return Err(Error::Config(format!("duplicate graph target id '{}'", t.id)));
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn to_yaml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            targets: &'a [GraphTarget],
        }
        crate::fsutil::to_yaml(&Out {
            targets: &self.targets,
        })
    }
}

/// Graphs for the reference platform.
pub const REFSIM_GRAPHS: &str = include_str!("../../assets/refsim-graphs.yaml");

pub fn refsim_graphs() -> GraphConfig {
    GraphConfig::parse(REFSIM_GRAPHS, Path::new("refsim-graphs.yaml"))
        .expect("built-in graph config is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_targets_and_warns_on_unknown_keys() {
        let text = "version: 2\ntargets:\n  - {id: a, kind: linegraph, scope: intra_exp, stem: s, columns: [c]}\n  - {id: b, kind: linegraph, scope: inter_exp, stem: s, columns: [c]}\n  - {id: h, kind: heatmap, scope: intra_exp, stem: spatial}\n";
        let c = GraphConfig::parse(text, Path::new("g.yaml")).unwrap();
        assert_eq!(c.targets.len(), 3);
        assert!(GraphConfig::parse("", Path::new("g")).unwrap().targets.is_empty());
    }

    #[test]
    fn rejects_bad_targets() {
        let dup = "targets:\n  - {id: a, kind: heatmap, scope: intra_exp, stem: s}\n  - {id: a, kind: heatmap, scope: intra_exp, stem: s}\n";
        assert!(GraphConfig::parse(dup, Path::new("g")).unwrap_err().to_string().contains("duplicate"));
        let kind = "targets:\n  - {id: z, kind: pie, scope: intra_exp, stem: s}\n";
        assert!(GraphConfig::parse(kind, Path::new("g")).unwrap_err().to_string().contains("'z'"));
        let video = "targets:\n  - {id: v, kind: video, scope: inter_exp, stem: s}\n";
        assert!(GraphConfig::parse(video, Path::new("g")).is_err());
    }

    #[test]
    fn builtin_config_and_model_refs() {
        assert!(!refsim_graphs().targets.is_empty());
        let m = ModelRef::parse_cli("model.constant:12.5").unwrap();
        assert_eq!(m.params["value"].as_f64(), Some(12.5));
        assert!(ModelRef::parse_cli(":3").is_err());
    }
}
