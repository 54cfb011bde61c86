//! Model overlays: extra series computed from the empirical axis.
//!
//! Built-ins are `model.constant` (`value`) and `model.replay`, which
//! returns the empirical series itself. Other ids resolve to `model`
//! plugins whose `command` is run as `command <input.csv> <output.csv>`;
//! the input has columns `x,y`, the output must have a `y` column of the
//! same length.

use std::path::PathBuf;
use std::process::Command;

use serde::Deserialize;

use super::config::ModelRef;
use super::doc::{PlotDocument, Series};
use crate::error::{Error, IoContext, Result};
use crate::fsutil;
use crate::plugin::{PluginPath, PluginType};
use crate::results::{format_cell, DataTable};

#[derive(Debug, Deserialize)]
struct ModelManifest {
    command: PathBuf,
}

/// Where external models exchange files.
pub struct ModelContext<'a> {
    pub plugin_path: &'a PluginPath,
    pub work_dir: PathBuf,
}

fn param_f64(m: &ModelRef, key: &str) -> Result<f64> {
    m.params
        .get(key)
        .and_then(|v| v.as_f64().or_else(|| v.as_str().and_then(|s| s.parse().ok())))
        .ok_or_else(|| Error::Plugin(format!("model '{}' needs a numeric '{key}' parameter", m.id)))
}

fn model_label(m: &ModelRef) -> String {
    match m.params.get("value") {
        Some(v) => {
            let v = serde_yaml::to_string(v).unwrap_or_default();
            format!("{} ({})", m.id, v.trim())
        }
        None => m.id.clone(),
    }
}

fn run_external(m: &ModelRef, ctx: &ModelContext<'_>, doc_id: &str, base: &Series) -> Result<Vec<f64>> {
    let found = ctx.plugin_path.find(PluginType::Model, &m.id)?.ok_or_else(|| {
        Error::Plugin(format!(
            "no model '{}' (built-in: model.constant, model.replay; searched {})",
            m.id,
            ctx.plugin_path.describe()
        ))
    })?;
    let manifest: ModelManifest = found.load()?;
    let exe = if manifest.command.is_relative() {
        found.dir.join(&manifest.command)
    } else {
        manifest.command.clone()
    };
    std::fs::create_dir_all(&ctx.work_dir).at(&ctx.work_dir)?;
    let input = ctx.work_dir.join(format!("{doc_id}.{}.input.csv", m.id));
    let output = ctx.work_dir.join(format!("{doc_id}.{}.output.csv", m.id));
    let mut csv = String::from("x,y\n");
    for (x, y) in base.x.iter().zip(&base.y) {
        csv += &format!("{},{}\n", format_cell(*x), format_cell(*y));
    }
    fsutil::write_atomic(&input, csv)?;
    let mut cmd = Command::new(&exe);
    cmd.arg(&input).arg(&output);
    for (k, v) in &m.params {
        let v = serde_yaml::to_string(v).unwrap_or_default();
        cmd.env(format!("XBATCH_MODEL_{}", k.to_ascii_uppercase()), v.trim());
    }
    let out = cmd
        .output()
        .map_err(|e| Error::Plugin(format!("model '{}': cannot run {}: {e}", m.id, exe.display())))?;
    if !out.status.success() {
        return Err(Error::Plugin(format!(
            "model '{}' failed: {}",
            m.id,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let t = DataTable::read(&m.id, &output, b',')?;
    let idx = t.column_index("y")?;
    Ok(t.column(idx).collect())
}

/// Appends one dashed series per model, aligned to the first empirical
/// series of `doc`.
pub fn overlay_models(doc: &mut PlotDocument, models: &[ModelRef], ctx: &ModelContext<'_>) -> Result<()> {
    if models.is_empty() {
        return Ok(());
    }
    let base = doc
        .series
        .iter()
        .find(|s| !s.is_model())
        .cloned()
        .ok_or_else(|| Error::Plot(format!("{}: no empirical series to overlay", doc.id)))?;
    for m in models {
        let y = match m.id.as_str() {
            "model.constant" => vec![param_f64(m, "value")?; base.x.len()],
            "model.replay" => base.y.clone(),
            _ => run_external(m, ctx, &doc.id, &base)?,
        };
        if y.len() != base.x.len() {
            return Err(Error::Plot(format!(
                "model '{}' returned {} values for a {}-point series",
                m.id,
                y.len(),
                base.x.len()
            )));
        }
        doc.series.push(Series {
            label: model_label(m),
            x: base.x.clone(),
            y,
            style: Some("dashed".into()),
            model: Some(m.id.clone()),
            ..Default::default()
        });
    }
    Ok(())
}
