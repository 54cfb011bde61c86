//! Plot documents: the canonical stage-4 artifact, serialized as JSON.
//!
//! Missing values are NaN in memory and `null` in JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

pub const DOC_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Linegraph,
    Heatmap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log2,
    Log10,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Axis {
    pub label: String,
    #[serde(default)]
    pub scale: Scale,
    /// Category names when the axis is not numeric; `x` then holds indices.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ticks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    #[serde(with = "nan_vec")]
    pub x: Vec<f64>,
    #[serde(with = "nan_vec")]
    pub y: Vec<f64>,
    #[serde(default, with = "nan_opt_vec", skip_serializing_if = "Option::is_none")]
    pub band_lo: Option<Vec<f64>>,
    #[serde(default, with = "nan_opt_vec", skip_serializing_if = "Option::is_none")]
    pub band_hi: Option<Vec<f64>>,
    #[serde(default, with = "nan_opt_vec", skip_serializing_if = "Option::is_none")]
    pub whisker_lo: Option<Vec<f64>>,
    #[serde(default, with = "nan_opt_vec", skip_serializing_if = "Option::is_none")]
    pub whisker_hi: Option<Vec<f64>>,
    /// Style hint, e.g. `dashed` for model overlays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    /// Id of the model that produced this series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl Series {
    pub fn is_model(&self) -> bool {
        self.model.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatrixPanel {
    pub title: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(with = "nan_mat")]
    pub cells: Vec<Vec<f64>>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Per-cell interval bounds, when known.
    #[serde(default, with = "nan_opt_mat", skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<Vec<f64>>>,
    #[serde(default, with = "nan_opt_mat", skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest_digest: String,
    pub criteria: Vec<String>,
    /// Creation time of the source batch, so regeneration is byte-stable.
    pub generated: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotDocument {
    pub schema: u32,
    pub id: String,
    pub kind: PlotKind,
    pub title: String,
    pub x_axis: Axis,
    pub y_axis: Axis,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<Series>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub panels: Vec<MatrixPanel>,
    pub provenance: Provenance,
}

fn le(a: f64, b: f64) -> bool {
    a.is_nan() || b.is_nan() || a <= b + 1e-9 * (1.0 + a.abs().max(b.abs()))
}

impl PlotDocument {
    pub fn new(id: &str, kind: PlotKind, title: &str, x_axis: Axis, y_axis: Axis, provenance: Provenance) -> Self {
        PlotDocument {
            schema: DOC_SCHEMA,
            id: id.to_string(),
            kind,
            title: title.to_string(),
            x_axis,
            y_axis,
            series: Vec::new(),
            panels: Vec::new(),
            provenance,
        }
    }

    /// Equal lengths, ordered bands, rectangular panels.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Plot(format!("{}: {m}", self.id)));
        for s in &self.series {
            if s.x.len() != s.y.len() {
                return bad(format!("series '{}' has {} x and {} y values", s.label, s.x.len(), s.y.len()));
            }
            for (name, lo, hi) in [
                ("band", &s.band_lo, &s.band_hi),
                ("whisker", &s.whisker_lo, &s.whisker_hi),
            ] {
                match (lo, hi) {
                    (None, None) => {}
                    (Some(lo), Some(hi)) => {
                        if lo.len() != s.y.len() || hi.len() != s.y.len() {
                            return bad(format!("series '{}' {name} length differs from y", s.label));
                        }
                        for i in 0..s.y.len() {
                            if !(le(lo[i], s.y[i]) && le(s.y[i], hi[i])) {
                                return bad(format!(
                                    "series '{}' point {i}: {name} [{}, {}] does not contain {}",
                                    s.label, lo[i], hi[i], s.y[i]
                                ));
                            }
                        }
                    }
                    _ => return bad(format!("series '{}' has only one {name} bound", s.label)),
                }
            }
        }
        for p in &self.panels {
            let rect = |m: &Vec<Vec<f64>>| m.len() == p.rows && m.iter().all(|r| r.len() == p.cols);
            if !rect(&p.cells) || p.lo.as_ref().is_some_and(|m| !rect(m)) || p.hi.as_ref().is_some_and(|m| !rect(m)) {
                return bad(format!("panel '{}' is not {}x{}", p.title, p.rows, p.cols));
            }
            if p.row_labels.len() != p.rows || p.col_labels.len() != p.cols {
                return bad(format!("panel '{}' label count does not match its shape", p.title));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fsutil::write_atomic(path, self.to_json()?)
    }
}

fn to_opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

fn from_opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

mod nan_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| super::to_opt(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(super::from_opt).collect())
    }
}

mod nan_opt_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|v| v.iter().map(|&x| super::to_opt(x)).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Ok(Option::<Vec<Option<f64>>>::deserialize(d)?
            .map(|v| v.into_iter().map(super::from_opt).collect()))
    }
}

mod nan_mat {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|r| r.iter().map(|&x| super::to_opt(x)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Ok(Vec::<Vec<Option<f64>>>::deserialize(d)?
            .into_iter()
            .map(|r| r.into_iter().map(super::from_opt).collect())
            .collect())
    }
}

mod nan_opt_mat {
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Vec<Vec<f64>>>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => super::nan_mat::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Vec<f64>>>, D::Error> {
        super::nan_mat::deserialize(d).map(Some)
    }
}
