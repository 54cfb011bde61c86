//! Stage 5: combining plot documents of several batches.
//!
//! Intra-scenario comparisons hold the criteria and scenario fixed and vary
//! the controller; inter-scenario comparisons hold the controller fixed.
//! Source batches are only read.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::criteria::label_numeric;
use crate::deliverables::{
    overlay_models, render_plot, Axis, MatrixPanel, ModelContext, ModelRef, PlotDocument, PlotKind,
    Provenance, Series,
};
use crate::error::{Error, Result};
use crate::expgen::{BatchLayout, Manifest};
use crate::fsutil;
use crate::plugin::PluginPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareMode {
    Intra,
    Inter,
}

impl FromStr for CompareMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intra" | "intra_scenario" => Ok(CompareMode::Intra),
            "inter" | "inter_scenario" => Ok(CompareMode::Inter),
            other => Err(Error::Usage(format!("--compare-mode must be intra or inter, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsLines {
    Row,
    Col,
}

impl FromStr for AsLines {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row" => Ok(AsLines::Row),
            "col" => Ok(AsLines::Col),
            other => Err(Error::Usage(format!("--as-lines must be row or col, got '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonSpec {
    pub mode: CompareMode,
    pub roots: Vec<PathBuf>,
    pub target: String,
    pub output_id: String,
    pub output_root: PathBuf,
    pub as_lines: Option<AsLines>,
    /// Adds an A−B panel when comparing two heatmaps.
    pub diff: bool,
    pub models: Vec<ModelRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDiff {
    pub field: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComparabilityReport {
    pub matching: Vec<String>,
    pub differing: Vec<FieldDiff>,
    pub intra_ok: bool,
    pub inter_ok: bool,
    pub warnings: Vec<String>,
}

impl ComparabilityReport {
    pub fn ok(&self, mode: CompareMode) -> bool {
        match mode {
            CompareMode::Intra => self.intra_ok,
            CompareMode::Inter => self.inter_ok,
        }
    }

    fn differs(&self, field: &str) -> Option<&FieldDiff> {
        self.differing.iter().find(|d| d.field == field)
    }

    /// Why `mode` is rejected, naming the fields that break it.
    pub fn rejection(&self, mode: CompareMode) -> Option<String> {
        let must_match: &[&str] = match mode {
            CompareMode::Intra => &["criteria", "scenario", "platform"],
            CompareMode::Inter => &["controller", "platform"],
        };
        let broken: Vec<String> = must_match
            .iter()
            .filter_map(|f| self.differs(f))
            .map(|d| format!("{} differs ({})", d.field, d.values.join(" vs ")))
            .collect();
        (!broken.is_empty()).then(|| broken.join("; "))
    }
}

impl fmt::Display for ComparabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "matching: {}", self.matching.join(", "))?;
        for d in &self.differing {
            writeln!(f, "differing: {} = [{}]", d.field, d.values.join(", "))?;
        }
        write!(f, "intra: {}, inter: {}", self.intra_ok, self.inter_ok)
    }
}

fn opt(v: &Option<String>) -> String {
    v.clone().unwrap_or_else(|| "-".into())
}

pub fn validate_comparability(manifests: &[Manifest]) -> ComparabilityReport {
    type Getter = Box<dyn Fn(&Manifest) -> String>;
    let fields: Vec<(&str, Getter)> = vec![
        ("criteria", Box::new(|m: &Manifest| m.criteria.join(" "))),
        ("scenario", Box::new(|m: &Manifest| opt(&m.scenario))),
        ("controller", Box::new(|m: &Manifest| opt(&m.controller))),
        ("robot", Box::new(|m: &Manifest| opt(&m.robot))),
        ("platform", Box::new(|m: &Manifest| m.platform.clone())),
        ("exp_setup", Box::new(|m: &Manifest| m.exp_setup.token())),
        ("n_runs", Box::new(|m: &Manifest| m.n_runs.to_string())),
        ("shape", Box::new(|m: &Manifest| format!("{}x{}", m.rows, m.cols))),
    ];
    let mut report = ComparabilityReport::default();
    for (name, get) in &fields {
        let values: Vec<String> = manifests.iter().map(get).collect();
        if values.windows(2).all(|w| w[0] == w[1]) {
            report.matching.push(name.to_string());
        } else {
            report.differing.push(FieldDiff {
                field: name.to_string(),
                values,
            });
        }
    }
    report.intra_ok = manifests.len() >= 2 && report.rejection(CompareMode::Intra).is_none();
    report.inter_ok = manifests.len() >= 2 && report.rejection(CompareMode::Inter).is_none();
    if manifests.len() < 2 {
        report.warnings.push("a comparison needs at least two batches".into());
    }
    if report.intra_ok && report.differs("controller").is_none() {
        report.warnings.push("all batches share one controller; series will coincide".into());
    }
    if report.inter_ok && report.differs("scenario").is_none() {
        report.warnings.push("all batches share one scenario; series will coincide".into());
    }
    report
}

struct Source {
    root: PathBuf,
    manifest: Manifest,
    label: String,
}

fn source_label(mode: CompareMode, root: &Path, m: &Manifest) -> String {
    let fallback = || {
        root.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| root.display().to_string())
    };
    match mode {
        CompareMode::Intra => m.controller.clone().unwrap_or_else(fallback),
        CompareMode::Inter => m.scenario.clone().unwrap_or_else(fallback),
    }
}

fn merged_provenance(sources: &[Source]) -> Result<Provenance> {
    let mut digests = String::new();
    for s in sources {
        digests += &s.manifest.digest()?;
    }
    Ok(Provenance {
        manifest_digest: fsutil::digest(digests.as_bytes()),
        criteria: sources[0].manifest.criteria.clone(),
        generated: sources.iter().map(|s| s.manifest.created.clone()).max().unwrap_or_default(),
        sources: sources.iter().map(|s| s.root.display().to_string()).collect(),
    })
}

fn merge_linegraphs(id: &str, docs: &[PlotDocument], sources: &[Source], prov: Provenance) -> PlotDocument {
    let first = &docs[0];
    let mut out = PlotDocument::new(id, PlotKind::Linegraph, &first.title, first.x_axis.clone(), first.y_axis.clone(), prov);
    for (doc, src) in docs.iter().zip(sources) {
        let empirical: Vec<&Series> = doc.series.iter().filter(|s| !s.is_model()).collect();
        for s in &empirical {
            let mut s = (*s).clone();
            s.label = if empirical.len() == 1 {
                src.label.clone()
            } else {
                format!("{}: {}", src.label, s.label)
            };
            out.series.push(s);
        }
    }
    out
}

fn merge_heatmaps(id: &str, docs: &[PlotDocument], sources: &[Source], diff: bool, prov: Provenance) -> Result<PlotDocument> {
    let first = &docs[0];
    let mut out = PlotDocument::new(id, PlotKind::Heatmap, &first.title, first.x_axis.clone(), first.y_axis.clone(), prov);
    for (doc, src) in docs.iter().zip(sources) {
        let mut p = doc
            .panels
            .first()
            .cloned()
            .ok_or_else(|| Error::Compare(format!("{}: heatmap has no panel", src.root.display())))?;
        p.title = src.label.clone();
        out.panels.push(p);
    }
    if diff {
        if out.panels.len() != 2 {
            return Err(Error::Compare("a difference panel needs exactly two batches".into()));
        }
        let (a, b) = (&out.panels[0], &out.panels[1]);
        if (a.rows, a.cols) != (b.rows, b.cols) {
            return Err(Error::Compare(format!(
                "cannot subtract a {}x{} heatmap from a {}x{} one",
                b.rows, b.cols, a.rows, a.cols
            )));
        }
        let cells = a
            .cells
            .iter()
            .zip(&b.cells)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
            .collect();
        let panel = MatrixPanel {
            title: format!("{} - {}", a.title, b.title),
            rows: a.rows,
            cols: a.cols,
            cells,
            row_labels: a.row_labels.clone(),
            col_labels: a.col_labels.clone(),
            lo: None,
            hi: None,
        };
        out.panels.push(panel);
    }
    Ok(out)
}

fn lines_axis(labels: &[String], label: &str) -> (Vec<f64>, Axis) {
    let nums: Option<Vec<f64>> = labels.iter().map(|l| label_numeric(l)).collect();
    match nums {
        Some(x) => (x, Axis { label: label.into(), ..Default::default() }),
        None => (
            (0..labels.len()).map(|i| i as f64).collect(),
            Axis { label: label.into(), ticks: labels.to_vec(), ..Default::default() },
        ),
    }
}

/// One linegraph per heatmap row (or column), one series per batch.
fn heatmaps_as_lines(id: &str, docs: &[PlotDocument], sources: &[Source], along: AsLines, prov: &Provenance) -> Result<Vec<PlotDocument>> {
    let panels: Vec<&MatrixPanel> = docs
        .iter()
        .zip(sources)
        .map(|(d, s)| {
            d.panels
                .first()
                .ok_or_else(|| Error::Compare(format!("{}: heatmap has no panel", s.root.display())))
        })
        .collect::<Result<_>>()?;
    let p0 = panels[0];
    if panels.iter().any(|p| (p.rows, p.cols) != (p0.rows, p0.cols)) {
        return Err(Error::Compare("heatmaps differ in shape".into()));
    }
    let first = &docs[0];
    let (n_lines, line_labels, point_labels, x_label, line_axis) = match along {
        AsLines::Row => (p0.rows, &p0.row_labels, &p0.col_labels, &first.x_axis.label, &first.y_axis.label),
        AsLines::Col => (p0.cols, &p0.col_labels, &p0.row_labels, &first.y_axis.label, &first.x_axis.label),
    };
    let pick = |m: &Vec<Vec<f64>>, k: usize| -> Vec<f64> {
        match along {
            AsLines::Row => m[k].clone(),
            AsLines::Col => m.iter().map(|r| r[k]).collect(),
        }
    };
    let (x, x_axis) = lines_axis(point_labels, x_label);
    let suffix = match along {
        AsLines::Row => "row",
        AsLines::Col => "col",
    };
    let mut out = Vec::with_capacity(n_lines);
    for (k, line_label) in line_labels.iter().enumerate().take(n_lines) {
        let mut doc = PlotDocument::new(
            &format!("{id}-{suffix}{k}"),
            PlotKind::Linegraph,
            &format!("{} ({line_axis} = {line_label})", first.title),
            x_axis.clone(),
            Axis { label: p0.title.clone(), ..Default::default() },
            prov.clone(),
        );
        for (p, src) in panels.iter().zip(sources) {
            doc.series.push(Series {
                label: src.label.clone(),
                x: x.clone(),
                y: pick(&p.cells, k),
                band_lo: p.lo.as_ref().map(|m| pick(m, k)),
                band_hi: p.hi.as_ref().map(|m| pick(m, k)),
                ..Default::default()
            });
        }
        doc.validate()?;
        out.push(doc);
    }
    Ok(out)
}

/// Documents of `target` in one batch: the collated one, or one per
/// experiment.
fn find_docs(root: &Path, manifest: &Manifest, target: &str) -> Result<BTreeMap<Option<usize>, PathBuf>> {
    let layout = BatchLayout::new(root);
    let collated = layout.graphs_collated().join(format!("{target}.json"));
    let mut found = BTreeMap::new();
    if collated.is_file() {
        found.insert(None, collated);
        return Ok(found);
    }
    for exp in 0..manifest.cardinality {
        let p = layout.graphs_exp_dir(exp).join(format!("{target}.json"));
        if p.is_file() {
            found.insert(Some(exp), p);
        }
    }
    if found.is_empty() {
        return Err(Error::Compare(format!(
            "batch {} has no graph '{target}'; run stage 4 there first",
            root.display()
        )));
    }
    Ok(found)
}

#[derive(Debug, Clone, Default)]
pub struct CompareOutcome {
    pub documents: Vec<PathBuf>,
    pub report: ComparabilityReport,
}

fn write_doc(doc: &PlotDocument, dir: &Path, outcome: &mut CompareOutcome) -> Result<()> {
    let json = dir.join(format!("{}.json", doc.id));
    doc.save(&json)?;
    fsutil::write_atomic(&dir.join(format!("{}.svg", doc.id)), render_plot(doc))?;
    outcome.documents.push(json);
    Ok(())
}

pub fn compare(spec: &ComparisonSpec, plugin_path: &PluginPath) -> Result<CompareOutcome> {
    if spec.roots.len() < 2 {
        return Err(Error::Compare("--compare needs at least two batch roots".into()));
    }
    let sources: Vec<Source> = spec
        .roots
        .iter()
        .map(|root| {
            let manifest = BatchLayout::new(root).load_manifest()?;
            let label = source_label(spec.mode, root, &manifest);
            Ok(Source { root: root.clone(), manifest, label })
        })
        .collect::<Result<_>>()?;
    let manifests: Vec<Manifest> = sources.iter().map(|s| s.manifest.clone()).collect();
    let report = validate_comparability(&manifests);
    if let Some(why) = report.rejection(spec.mode) {
        let mode = match spec.mode {
            CompareMode::Intra => "intra",
            CompareMode::Inter => "inter",
        };
        return Err(Error::Compare(format!(
            "batches are not comparable for {mode}-scenario comparison: {why}"
        )));
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut roots_seen = std::collections::BTreeSet::new();
    for s in &sources {
        if !roots_seen.insert(&s.root) {
            log::warn!("batch {} is listed more than once", s.root.display());
        }
    }

    let found: Vec<_> = sources
        .iter()
        .map(|s| find_docs(&s.root, &s.manifest, &spec.target))
        .collect::<Result<_>>()?;
    let keys: Vec<Option<usize>> = found[0].keys().copied().collect();
    for (f, s) in found.iter().zip(&sources).skip(1) {
        if f.keys().copied().collect::<Vec<_>>() != keys {
            return Err(Error::Compare(format!(
                "batch {} has graph '{}' for different experiments than {}",
                s.root.display(),
                spec.target,
                sources[0].root.display()
            )));
        }
    }

    let prov = merged_provenance(&sources)?;
    let model_ctx = ModelContext { plugin_path, work_dir: spec.output_root.join("models") };
    let mut outcome = CompareOutcome { documents: Vec::new(), report };
    for key in keys {
        let docs: Vec<PlotDocument> = found
            .iter()
            .map(|f| PlotDocument::load(&f[&key]))
            .collect::<Result<_>>()?;
        if docs.iter().any(|d| d.kind != docs[0].kind) {
            return Err(Error::Compare(format!("graph '{}' differs in kind across batches", spec.target)));
        }
        let dir = match key {
            None => spec.output_root.clone(),
            Some(exp) => spec.output_root.join(format!("exp{exp}")),
        };
        match (docs[0].kind, spec.as_lines) {
            (PlotKind::Linegraph, _) => {
                let mut doc = merge_linegraphs(&spec.output_id, &docs, &sources, prov.clone());
                overlay_models(&mut doc, &spec.models, &model_ctx)?;
                doc.validate()?;
                write_doc(&doc, &dir, &mut outcome)?;
            }
            (PlotKind::Heatmap, None) => {
                let doc = merge_heatmaps(&spec.output_id, &docs, &sources, spec.diff, prov.clone())?;
                doc.validate()?;
                write_doc(&doc, &dir, &mut outcome)?;
            }
            (PlotKind::Heatmap, Some(along)) => {
                for mut doc in heatmaps_as_lines(&spec.output_id, &docs, &sources, along, &prov)? {
                    overlay_models(&mut doc, &spec.models, &model_ctx)?;
                    write_doc(&doc, &dir, &mut outcome)?;
                }
            }
        }
    }
    Ok(outcome)
}
