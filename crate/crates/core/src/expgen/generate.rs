use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::layout::{BatchLayout, ExperimentEntry, Manifest, MANIFEST_FORMAT};
use super::seeds::SeedTable;
use super::ExpSetup;
use crate::criteria::{expand_grid, BatchCriteria};
use crate::error::{Error, IoContext, Result};
use crate::fsutil;
use crate::platform::PlatformPlugin;
use crate::xml::{AttributeChangeSet, XmlTree};

/// User changes applied after the axis, platform and seed changes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraChanges {
    /// Applied to every experiment.
    #[serde(default)]
    pub all: AttributeChangeSet,
    /// Applied only to the experiment with the given index.
    #[serde(default)]
    pub per_experiment: BTreeMap<usize, AttributeChangeSet>,
}

impl ExtraChanges {
    pub fn merge(&mut self, other: &ExtraChanges) {
        self.all.extend(&other.all);
        for (exp, cs) in &other.per_experiment {
            self.per_experiment.entry(*exp).or_default().extend(cs);
        }
    }

    pub fn for_experiment(&self, exp: usize) -> AttributeChangeSet {
        let mut cs = self.all.clone();
        if let Some(extra) = self.per_experiment.get(&exp) {
            cs.extend(extra);
        }
        cs
    }
}

pub struct GenerateRequest<'a> {
    pub layout: BatchLayout,
    pub template: &'a XmlTree,
    pub criteria: &'a BatchCriteria,
    pub n_runs: usize,
    pub exp_setup: ExpSetup,
    pub platform: &'a PlatformPlugin,
    pub extra: &'a ExtraChanges,
    pub master_seed: u64,
    pub force_regen: bool,
    pub platform_vc: bool,
    pub project: String,
    pub exec_env: String,
    pub controller: Option<String>,
    pub robot: Option<String>,
    pub scenario: Option<String>,
    pub flags: BTreeMap<String, String>,
}

/// Writes the batch inputs, seeds and manifest.
///
/// Every input document is built in memory first; files are written into a
/// staging directory under the batch root and moved into place only after
/// everything succeeded, so a failure leaves the previous batch (or nothing).
pub fn generate_batch(req: &GenerateRequest<'_>) -> Result<Manifest> {
    if req.n_runs == 0 {
        return Err(Error::Usage("--n-runs must be at least 1".into()));
    }
    let layout = &req.layout;
    let points = expand_grid(req.criteria)?;
    let (seeds, _) = SeedTable::resolve(
        &layout.seeds_path(),
        req.master_seed,
        points.len(),
        req.n_runs,
        req.force_regen,
    )?;

    let mut platform_changes = req.platform.setup_changes(&req.exp_setup);
    if req.platform_vc {
        platform_changes.extend(&req.platform.vc_hooks);
    }

    let mut documents: Vec<Vec<String>> = Vec::with_capacity(points.len());
    for point in &points {
        let exp_tree = req
            .template
            .apply(&point.changes)?
            .apply(&platform_changes)?;
        let extra = req.extra.for_experiment(point.index);
        let mut runs = Vec::with_capacity(req.n_runs);
        for run in 0..req.n_runs {
            let seeded = exp_tree.apply(&AttributeChangeSet(vec![
                req.platform.seed_change(seeds.seed(point.index, run)),
            ]))?;
            runs.push(seeded.apply(&extra)?.to_xml_string());
        }
        documents.push(runs);
    }

    let (rows, cols) = req.criteria.shape();
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        project: req.project.clone(),
        criteria: req.criteria.tokens(),
        arity: req.criteria.arity(),
        axes: Manifest::axes_from(req.criteria),
        rows,
        cols,
        cardinality: points.len(),
        platform: req.platform.id.clone(),
        exec_env: req.exec_env.clone(),
        n_runs: req.n_runs,
        exp_setup: req.exp_setup,
        controller: req.controller.clone(),
        robot: req.robot.clone(),
        scenario: req.scenario.clone(),
        template: req
            .template
            .source_path
            .clone()
            .unwrap_or_else(|| PathBuf::from("<memory>")),
        master_seed: seeds.master_seed,
        platform_vc: req.platform_vc,
        created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        experiments: points
            .iter()
            .map(|p| ExperimentEntry {
                index: p.index,
                row: p.row,
                col: p.col,
                labels: p.labels.clone(),
            })
            .collect(),
        flags: req.flags.clone(),
    };

    let staging = layout.root.join(".stage1.tmp");
    if staging.exists() {
        fs::remove_dir_all(&staging).at(&staging)?;
    }
    let staged = BatchLayout::new(&staging);
    let write = || -> Result<()> {
        for (exp, runs) in documents.iter().enumerate() {
            for (run, doc) in runs.iter().enumerate() {
                let dir = staged.run_input_dir(exp, run);
                fs::create_dir_all(&dir).at(&dir)?;
                let path = staged.input_xml(exp, run);
                fs::write(&path, doc).at(&path)?;
            }
        }
        fs::write(staged.seeds_path(), seeds.to_yaml()?).at(staged.seeds_path())?;
        fs::write(staged.manifest_path(), manifest.to_yaml()?).at(staged.manifest_path())?;
        Ok(())
    };
    if let Err(e) = write() {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }

    let inputs = layout.exp_inputs();
    if inputs.exists() {
        fs::remove_dir_all(&inputs).at(&inputs)?;
    }
    fs::rename(staged.exp_inputs(), &inputs).at(&inputs)?;
    fs::rename(staged.seeds_path(), layout.seeds_path()).at(layout.seeds_path())?;
    fs::rename(staged.manifest_path(), layout.manifest_path()).at(layout.manifest_path())?;
    fs::remove_dir_all(&staging).at(&staging)?;
    Ok(manifest)
}

impl Manifest {
    /// Re-reads the manifest written by [`generate_batch`].
    pub fn load(layout: &BatchLayout) -> Result<Self> {
        fsutil::read_yaml(&layout.manifest_path())
    }
}
