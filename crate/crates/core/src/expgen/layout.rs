use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExpSetup;
use crate::criteria::{criteria_slug, Arity, BatchCriteria, CriterionKind};
use crate::error::Result;
use crate::fsutil;

pub const MANIFEST_FORMAT: u32 = 1;

/// Paths of one batch experiment on disk.
///
/// ```text
/// <root>/manifest.yaml, seeds.yaml, events.jsonl
/// <root>/exp-inputs/exp<i>/run<j>/input.xml
/// <root>/exp-outputs/exp<i>/{commands.txt,exec.yaml}
/// <root>/exp-outputs/exp<i>/run<j>/{run.log,output/}
/// <root>/statistics/exp<i>/..., statistics/collated/...
/// <root>/graphs/exp<i>/..., graphs/collated/...
/// <root>/videos/, <root>/models/
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchLayout {
    pub root: PathBuf,
}

impl BatchLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        BatchLayout { root: root.into() }
    }

    /// `<sierra_root>/<project>/<slug>`, where the slug is the criteria
    /// tokens joined by `+`, prefixed by `controller=`/`scenario=` parts
    /// when those are set.
    pub fn for_batch(
        sierra_root: &Path,
        project: &str,
        controller: Option<&str>,
        scenario: Option<&str>,
        tokens: &[String],
    ) -> Self {
        let mut parts = Vec::new();
        if let Some(c) = controller {
            parts.push(format!("controller={c}"));
        }
        if let Some(s) = scenario {
            parts.push(format!("scenario={s}"));
        }
        parts.push(criteria_slug(tokens));
        BatchLayout::new(sierra_root.join(project).join(parts.join("+").replace('/', "_")))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.yaml")
    }

    pub fn seeds_path(&self) -> PathBuf {
        self.root.join(super::SEEDS_FILE)
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    pub fn exp_inputs(&self) -> PathBuf {
        self.root.join("exp-inputs")
    }

    pub fn exp_input_dir(&self, exp: usize) -> PathBuf {
        self.exp_inputs().join(format!("exp{exp}"))
    }

    pub fn run_input_dir(&self, exp: usize, run: usize) -> PathBuf {
        self.exp_input_dir(exp).join(format!("run{run}"))
    }

    pub fn input_xml(&self, exp: usize, run: usize) -> PathBuf {
        self.run_input_dir(exp, run).join("input.xml")
    }

    pub fn exp_outputs(&self) -> PathBuf {
        self.root.join("exp-outputs")
    }

    pub fn exp_output_dir(&self, exp: usize) -> PathBuf {
        self.exp_outputs().join(format!("exp{exp}"))
    }

    pub fn run_output_dir(&self, exp: usize, run: usize) -> PathBuf {
        self.exp_output_dir(exp).join(format!("run{run}"))
    }

    pub fn commands_path(&self, exp: usize) -> PathBuf {
        self.exp_output_dir(exp).join("commands.txt")
    }

    pub fn exec_path(&self, exp: usize) -> PathBuf {
        self.exp_output_dir(exp).join("exec.yaml")
    }

    pub fn statistics(&self) -> PathBuf {
        self.root.join("statistics")
    }

    pub fn stats_exp_dir(&self, exp: usize) -> PathBuf {
        self.statistics().join(format!("exp{exp}"))
    }

    pub fn stats_collated(&self) -> PathBuf {
        self.statistics().join("collated")
    }

    pub fn graphs(&self) -> PathBuf {
        self.root.join("graphs")
    }

    pub fn graphs_exp_dir(&self, exp: usize) -> PathBuf {
        self.graphs().join(format!("exp{exp}"))
    }

    pub fn graphs_collated(&self) -> PathBuf {
        self.graphs().join("collated")
    }

    pub fn videos(&self) -> PathBuf {
        self.root.join("videos")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn load_manifest(&self) -> Result<Manifest> {
        fsutil::read_yaml(&self.manifest_path())
    }

    /// Path of `p` relative to the batch root (for portable command files).
    pub fn relative<'a>(&self, p: &'a Path) -> &'a Path {
        p.strip_prefix(&self.root).unwrap_or(p)
    }
}

/// One criteria axis as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisInfo {
    pub token: String,
    pub kind: CriterionKind,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentEntry {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub labels: Vec<String>,
}

/// Self-description of a batch, written at generation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub project: String,
    pub criteria: Vec<String>,
    pub arity: Arity,
    pub axes: Vec<AxisInfo>,
    pub rows: usize,
    pub cols: usize,
    pub cardinality: usize,
    pub platform: String,
    pub exec_env: String,
    pub n_runs: usize,
    pub exp_setup: ExpSetup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub template: PathBuf,
    pub master_seed: u64,
    pub platform_vc: bool,
    /// RFC 3339 creation time.
    pub created: String,
    pub experiments: Vec<ExperimentEntry>,
    /// Snapshot of the invocation flags.
    #[serde(default)]
    pub flags: BTreeMap<String, String>,
}

impl Manifest {
    pub fn axes_from(criteria: &BatchCriteria) -> Vec<AxisInfo> {
        std::iter::once(&criteria.axis_a)
            .chain(criteria.axis_b.as_ref())
            .map(|d| AxisInfo {
                token: d.token.clone(),
                kind: d.kind,
                labels: d.labels(),
            })
            .collect()
    }

    pub fn to_yaml(&self) -> Result<String> {
        fsutil::to_yaml(self)
    }

    /// Digest of the serialized manifest.
    pub fn digest(&self) -> Result<String> {
        Ok(fsutil::digest(self.to_yaml()?.as_bytes()))
    }

    pub fn experiment_label(&self, exp: usize) -> String {
        self.experiments
            .get(exp)
            .map(|e| e.labels.join(","))
            .unwrap_or_else(|| format!("exp{exp}"))
    }
}
