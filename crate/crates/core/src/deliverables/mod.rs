//! Stage 4: plot documents from statistics, SVG renderings, model
//! overlays and video encoder commands.

mod config;
mod doc;
mod models;
mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::criteria::{label_numeric, Arity};
use crate::error::{Error, IoContext, Result};
use crate::exec::ExpRange;
use crate::expgen::{AxisInfo, BatchLayout, Manifest};
use crate::fsutil;
use crate::plugin::PluginPath;
use crate::results::{load_summary, DataTable, DistStats, Matrix, Stat, SummaryTable};

pub use config::{refsim_graphs, GraphConfig, GraphTarget, ModelRef, Scope, TargetKind, REFSIM_GRAPHS};
pub use doc::{Axis, MatrixPanel, PlotDocument, PlotKind, Provenance, Scale, Series, DOC_SCHEMA};
pub use models::{overlay_models, ModelContext};
pub use svg::{fmt_num, render_plot};

pub const DEFAULT_VIDEO_TEMPLATE: &str =
    "ffmpeg -y -framerate {framerate} -pattern_type glob -i {input_glob} -c:v libx264 -pix_fmt yuv420p {output}";

pub fn provenance(manifest: &Manifest) -> Result<Provenance> {
    Ok(Provenance {
        manifest_digest: manifest.digest()?,
        criteria: manifest.criteria.clone(),
        generated: manifest.created.clone(),
        sources: Vec::new(),
    })
}

/// Center line and band statistics for a dist-stats mode. Box-whisker
/// plots center on the median so the quartile band always contains it.
fn band_stats(dist: DistStats) -> (Stat, Stat, Stat, Option<(Stat, Stat)>) {
    match dist {
        DistStats::Conf95 | DistStats::All => (Stat::Mean, Stat::CiL95, Stat::CiH95, None),
        DistStats::Bw => (Stat::Median, Stat::Q1, Stat::Q3, Some((Stat::Min, Stat::Max))),
    }
}

/// Time series of one experiment; `stats` maps each statistic to its table.
pub fn gen_intra_linegraph(
    stats: &BTreeMap<Stat, DataTable>,
    target: &GraphTarget,
    dist: DistStats,
    prov: Provenance,
) -> Result<PlotDocument> {
    let (center, lo, hi, whiskers) = band_stats(dist);
    let get = |s: Stat| {
        stats
            .get(&s)
            .ok_or_else(|| Error::Plot(format!("{}: statistic '{s}' not available", target.id)))
    };
    let base = get(center)?;
    let x: Vec<f64> = match base.columns.first() {
        Some(c) if DataTable::is_index_column(c) => base.column(0).collect(),
        _ => (0..base.rows.len()).map(|i| i as f64).collect(),
    };
    let x_label = target.x_label.clone().unwrap_or_else(|| match base.columns.first() {
        Some(c) if DataTable::is_index_column(c) => c.clone(),
        _ => "row".into(),
    });
    let mut doc = PlotDocument::new(
        &target.id,
        PlotKind::Linegraph,
        &target.title,
        Axis { label: x_label, scale: target.x_scale.unwrap_or_default(), ticks: vec![] },
        Axis {
            label: target.y_label.clone().unwrap_or_else(|| target.columns.join(", ")),
            scale: target.y_scale.unwrap_or_default(),
            ticks: vec![],
        },
        prov,
    );
    for column in &target.columns {
        let col = |s: Stat| -> Result<Vec<f64>> {
            let t = get(s)?;
            Ok(t.column(t.column_index(column)?).collect())
        };
        let whisk = match whiskers {
            Some((a, b)) => (Some(col(a)?), Some(col(b)?)),
            None => (None, None),
        };
        doc.series.push(Series {
            label: column.clone(),
            x: x.clone(),
            y: col(center)?,
            band_lo: Some(col(lo)?),
            band_hi: Some(col(hi)?),
            whisker_lo: whisk.0,
            whisker_hi: whisk.1,
            ..Default::default()
        });
    }
    doc.validate()?;
    Ok(doc)
}

/// X values of an axis: numeric label parts when every label has one,
/// otherwise category indices with the labels as ticks.
fn axis_values(axis: &AxisInfo) -> (Vec<f64>, Vec<String>) {
    let nums: Option<Vec<f64>> = axis.labels.iter().map(|l| label_numeric(l)).collect();
    match nums {
        Some(v) => (v, Vec::new()),
        None => ((0..axis.labels.len()).map(|i| i as f64).collect(), axis.labels.clone()),
    }
}

/// One point per experiment of a univariate batch.
pub fn gen_inter_linegraph(
    summary: &SummaryTable,
    manifest: &Manifest,
    target: &GraphTarget,
    dist: DistStats,
    prov: Provenance,
) -> Result<PlotDocument> {
    if manifest.arity == Arity::Bivariate {
        return Err(Error::Plot(format!(
            "{}: inter_exp linegraphs need a univariate batch; use kind: heatmap for bivariate batches",
            target.id
        )));
    }
    let axis = &manifest.axes[0];
    let (x, ticks) = axis_values(axis);
    let geometric = axis.kind.is_geometric() && ticks.is_empty();
    let x_scale = target.x_scale.unwrap_or(if geometric { Scale::Log2 } else { Scale::Linear });
    let (center, lo, hi, whiskers) = band_stats(dist);
    let column = |s: Stat| -> Vec<f64> { summary.entries.iter().map(|e| e.stats.get(s)).collect() };
    let mut doc = PlotDocument::new(
        &target.id,
        PlotKind::Linegraph,
        &target.title,
        Axis { label: target.x_label.clone().unwrap_or_else(|| axis.token.clone()), scale: x_scale, ticks },
        Axis {
            label: target.y_label.clone().unwrap_or_else(|| summary.column.clone()),
            scale: target.y_scale.unwrap_or_default(),
            ticks: vec![],
        },
        prov,
    );
    doc.series.push(Series {
        label: summary.column.clone(),
        x,
        y: column(center),
        band_lo: Some(column(lo)),
        band_hi: Some(column(hi)),
        whisker_lo: whiskers.map(|(a, _)| column(a)),
        whisker_hi: whiskers.map(|(_, b)| column(b)),
        ..Default::default()
    });
    doc.validate()?;
    Ok(doc)
}

pub fn heatmap_doc(
    target: &GraphTarget,
    panel: MatrixPanel,
    x_label: String,
    y_label: String,
    prov: Provenance,
) -> Result<PlotDocument> {
    let mut doc = PlotDocument::new(
        &target.id,
        PlotKind::Heatmap,
        &target.title,
        Axis { label: x_label, ..Default::default() },
        Axis { label: y_label, ..Default::default() },
        prov,
    );
    doc.panels.push(panel);
    doc.validate()?;
    Ok(doc)
}

fn check_rect(m: &Matrix, what: &str) -> Result<(usize, usize)> {
    let cols = m.first().map_or(0, Vec::len);
    if m.is_empty() || cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(Error::Plot(format!("{what}: matrix is empty or not rectangular")));
    }
    Ok((m.len(), cols))
}

/// Rows follow the first criterion, columns the second.
pub fn gen_inter_heatmap(
    summary: &SummaryTable,
    manifest: &Manifest,
    target: &GraphTarget,
    prov: Provenance,
) -> Result<PlotDocument> {
    if manifest.arity != Arity::Bivariate {
        return Err(Error::Plot(format!(
            "{}: inter_exp heatmaps need a bivariate batch",
            target.id
        )));
    }
    let cells = summary.matrix(Stat::Mean);
    let (rows, cols) = check_rect(&cells, &target.id)?;
    let panel = MatrixPanel {
        title: summary.column.clone(),
        rows,
        cols,
        cells,
        row_labels: manifest.axes[0].labels.clone(),
        col_labels: manifest.axes[1].labels.clone(),
        lo: Some(summary.matrix(Stat::CiL95)),
        hi: Some(summary.matrix(Stat::CiH95)),
    };
    heatmap_doc(
        target,
        panel,
        target.x_label.clone().unwrap_or_else(|| manifest.axes[1].token.clone()),
        target.y_label.clone().unwrap_or_else(|| manifest.axes[0].token.clone()),
        prov,
    )
}

/// Heatmap of one averaged snapshot, indexed by grid position.
pub fn gen_frame_heatmap(frame: &Matrix, title: &str, target: &GraphTarget, prov: Provenance) -> Result<PlotDocument> {
    let (rows, cols) = check_rect(frame, &target.id)?;
    let panel = MatrixPanel {
        title: title.to_string(),
        rows,
        cols,
        cells: frame.clone(),
        row_labels: (0..rows).map(|r| r.to_string()).collect(),
        col_labels: (0..cols).map(|c| c.to_string()).collect(),
        lo: None,
        hi: None,
    };
    heatmap_doc(
        target,
        panel,
        target.x_label.clone().unwrap_or_else(|| "x".into()),
        target.y_label.clone().unwrap_or_else(|| "y".into()),
        prov,
    )
}

#[derive(Debug, Clone)]
pub struct VideoOptions {
    pub template: String,
    pub framerate: u32,
    /// Appended verbatim to the encoder command.
    pub extra_opts: String,
    pub execute: bool,
}

impl Default for VideoOptions {
    fn default() -> Self {
        VideoOptions {
            template: DEFAULT_VIDEO_TEMPLATE.into(),
            framerate: 10,
            extra_opts: String::new(),
            execute: false,
        }
    }
}

/// Encoder command for the frames in `frames_dir` named `*.<ext>`.
pub fn emit_video_cmd(frames_dir: &Path, ext: &str, output: &Path, opts: &VideoOptions) -> Result<String> {
    let has_frames = fs::read_dir(frames_dir)
        .map(|rd| {
            rd.flatten()
                .any(|e| e.path().extension().is_some_and(|x| x == ext))
        })
        .unwrap_or(false);
    if !has_frames {
        return Err(Error::Plot(format!("no .{ext} frames in {}", frames_dir.display())));
    }
    let glob = frames_dir.join(format!("*.{ext}"));
    let mut cmd = opts
        .template
        .replace("{framerate}", &opts.framerate.to_string())
        .replace("{input_glob}", &shell_words::quote(&glob.to_string_lossy()))
        .replace("{output}", &shell_words::quote(&output.to_string_lossy()));
    let extra = opts.extra_opts.trim();
    if !extra.is_empty() {
        cmd.push(' ');
        cmd.push_str(extra);
    }
    Ok(cmd)
}

#[derive(Debug, Clone)]
pub struct DeliverableOptions {
    pub range: ExpRange,
    pub dist_stats: DistStats,
    pub video: VideoOptions,
    pub plugin_path: PluginPath,
}

#[derive(Debug, Clone, Default)]
pub struct DeliverablesReport {
    pub documents: Vec<PathBuf>,
    pub video_commands: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

/// Writes `contents` unless the file already holds exactly that.
fn write_if_changed(path: &Path, contents: &str) -> Result<()> {
    if fs::read_to_string(path).ok().as_deref() == Some(contents) {
        return Ok(());
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fsutil::write_atomic(path, contents)
}

fn save(doc: &PlotDocument, dir: &Path, report: &mut DeliverablesReport) -> Result<()> {
    let json = dir.join(format!("{}.json", doc.id));
    write_if_changed(&json, &doc.to_json()?)?;
    write_if_changed(&dir.join(format!("{}.svg", doc.id)), &render_plot(doc))?;
    report.documents.push(json);
    Ok(())
}

fn read_stat_tables(layout: &BatchLayout, exp: usize, stem: &str, dist: DistStats) -> Result<BTreeMap<Stat, DataTable>> {
    let (c, lo, hi, wh) = band_stats(dist);
    let mut wanted = vec![c, lo, hi];
    if let Some((a, b)) = wh {
        wanted.extend([a, b]);
    }
    let mut out = BTreeMap::new();
    for s in wanted {
        let path = layout.stats_exp_dir(exp).join(format!("{stem}.{}.csv", s.id()));
        if !path.is_file() {
            return Err(Error::Config(format!(
                "{} is missing; run stage 3 with --dist-stats {}",
                layout.relative(&path).display(),
                match dist {
                    DistStats::Bw => "bw",
                    DistStats::All => "all",
                    DistStats::Conf95 => "conf95",
                }
            )));
        }
        out.insert(s, DataTable::read(stem, &path, b',')?);
    }
    Ok(out)
}

fn frame_path(layout: &BatchLayout, exp: usize, stem: &str, k: usize) -> PathBuf {
    layout.stats_exp_dir(exp).join("frames").join(format!("{stem}.{k}.csv"))
}

fn read_frames(layout: &BatchLayout, exp: usize, stem: &str) -> Result<Vec<Matrix>> {
    let mut frames = Vec::new();
    for k in 0.. {
        let p = frame_path(layout, exp, stem, k);
        if !p.is_file() {
            break;
        }
        frames.push(DataTable::read(stem, &p, b',')?.rows);
    }
    Ok(frames)
}

/// Whether `target` can be drawn for this batch; `Err` carries the reason.
fn applicable(target: &GraphTarget, manifest: &Manifest) -> std::result::Result<(), String> {
    match (target.kind, target.scope, manifest.arity) {
        (TargetKind::Linegraph, Scope::InterExp, Arity::Bivariate) => {
            Err("inter_exp linegraph on a bivariate batch".into())
        }
        (TargetKind::Heatmap, Scope::InterExp, Arity::Univariate) => {
            Err("inter_exp heatmap on a univariate batch".into())
        }
        (TargetKind::Video, _, _) if !manifest.platform_vc => {
            Err("video target without --platform-vc".into())
        }
        _ => Ok(()),
    }
}

/// Stage 4 over every target of `cfg`.
pub fn generate_deliverables(
    layout: &BatchLayout,
    manifest: &Manifest,
    cfg: &GraphConfig,
    opts: &DeliverableOptions,
) -> Result<DeliverablesReport> {
    if !layout.statistics().is_dir() {
        return Err(Error::Config(format!(
            "{} does not exist; run stage 3 first",
            layout.statistics().display()
        )));
    }
    let prov = provenance(manifest)?;
    let mut report = DeliverablesReport::default();
    let model_ctx = ModelContext {
        plugin_path: &opts.plugin_path,
        work_dir: layout.models(),
    };

    for target in &cfg.targets {
        if let Err(why) = applicable(target, manifest) {
            log::info!("skipping graph target '{}': {why}", target.id);
            report.skipped.push(target.id.clone());
            continue;
        }
        match (target.kind, target.scope) {
            (TargetKind::Linegraph, Scope::IntraExp) => {
                for exp in opts.range.iter() {
                    let stats = read_stat_tables(layout, exp, &target.stem, opts.dist_stats)?;
                    let mut doc = gen_intra_linegraph(&stats, target, opts.dist_stats, prov.clone())?;
                    overlay_models(&mut doc, &target.models, &model_ctx)?;
                    save(&doc, &layout.graphs_exp_dir(exp), &mut report)?;
                }
            }
            (TargetKind::Linegraph, Scope::InterExp) => {
                for column in &target.columns {
                    let summary = load_summary(layout, manifest, &target.stem, column)?;
                    let mut doc = gen_inter_linegraph(&summary, manifest, target, opts.dist_stats, prov.clone())?;
                    if target.columns.len() > 1 {
                        doc.id = format!("{}-{column}", target.id);
                    }
                    overlay_models(&mut doc, &target.models, &model_ctx)?;
                    save(&doc, &layout.graphs_collated(), &mut report)?;
                }
            }
            (TargetKind::Heatmap, Scope::InterExp) => {
                let summary = load_summary(layout, manifest, &target.stem, &target.columns[0])?;
                let doc = gen_inter_heatmap(&summary, manifest, target, prov.clone())?;
                save(&doc, &layout.graphs_collated(), &mut report)?;
            }
            (TargetKind::Heatmap, Scope::IntraExp) => {
                for exp in opts.range.iter() {
                    let frames = read_frames(layout, exp, &target.stem)?;
                    if frames.is_empty() {
                        return Err(Error::Config(format!(
                            "graph target '{}': no {} frames for exp{exp}; run stage 3 first",
                            target.id, target.stem
                        )));
                    }
                    let k = target.frame.unwrap_or(frames.len() - 1);
                    let frame = frames.get(k).ok_or_else(|| {
                        Error::Config(format!("graph target '{}': exp{exp} has no frame {k}", target.id))
                    })?;
                    let title = format!("{} (snapshot {k})", manifest.experiment_label(exp));
                    let doc = gen_frame_heatmap(frame, &title, target, prov.clone())?;
                    save(&doc, &layout.graphs_exp_dir(exp), &mut report)?;
                }
            }
            (TargetKind::Video, _) => {
                for exp in opts.range.iter() {
                    let frames = read_frames(layout, exp, &target.stem)?;
                    let dir = layout.graphs_exp_dir(exp).join(&target.id);
                    for (k, frame) in frames.iter().enumerate() {
                        let title = format!("{} (snapshot {k})", manifest.experiment_label(exp));
                        let doc = gen_frame_heatmap(frame, &title, target, prov.clone())?;
                        write_if_changed(&dir.join(format!("frame-{k:04}.svg")), &render_plot(&doc))?;
                    }
                    let out_dir = layout.videos().join(format!("exp{exp}"));
                    let output = out_dir.join(format!("{}.mp4", target.id));
                    let cmd = emit_video_cmd(&dir, "svg", &output, &opts.video)?;
                    let cmd_path = out_dir.join(format!("{}.cmd", target.id));
                    write_if_changed(&cmd_path, &format!("{cmd}\n"))?;
                    if opts.video.execute {
                        let status = std::process::Command::new("sh")
                            .arg("-c")
                            .arg(&cmd)
                            .current_dir(&layout.root)
                            .status()
                            .map_err(|e| Error::Plot(format!("cannot run encoder: {e}")))?;
                        if !status.success() {
                            return Err(Error::Plot(format!("encoder failed for exp{exp} ({status})")));
                        }
                    }
                    report.video_commands.push(cmd_path);
                }
            }
        }
    }
    Ok(report)
}
