//! Built-in criterion parsers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::registry::CriterionParser;
use super::{CriterionDef, CriterionKind, CriterionSpec, ValuePoint};
use crate::error::Result;
use crate::xml::{AttributeChangeSet, Change};

/// An attribute on an element, the write target of a criterion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrTarget {
    pub path: String,
    pub attr: String,
}

impl AttrTarget {
    pub fn new(path: &str, attr: &str) -> Self {
        AttrTarget {
            path: path.to_string(),
            attr: attr.to_string(),
        }
    }

    fn set(&self, value: impl Into<String>) -> Change {
        Change::set_attr(self.path.clone(), self.attr.clone(), value)
    }

    fn value_in<'a>(&self, changes: &'a AttributeChangeSet) -> Option<&'a str> {
        changes.iter().find_map(|c| match c {
            Change::SetAttr { path, name, value } if *path == self.path && *name == self.attr => {
                Some(value.as_str())
            }
            _ => None,
        })
    }
}

/// Declares one built-in parser instance and where it writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParserDecl {
    Population {
        id: String,
        target: AttrTarget,
    },
    ScalarRange {
        id: String,
        target: AttrTarget,
    },
    NoiseLevels {
        id: String,
        targets: Vec<AttrTarget>,
    },
    PolicySet {
        id: String,
        target: AttrTarget,
        universe: Vec<String>,
        #[serde(default)]
        size_target: Option<AttrTarget>,
    },
}

impl ParserDecl {
    pub fn id(&self) -> &str {
        match self {
            ParserDecl::Population { id, .. }
            | ParserDecl::ScalarRange { id, .. }
            | ParserDecl::NoiseLevels { id, .. }
            | ParserDecl::PolicySet { id, .. } => id,
        }
    }

    pub fn build(&self) -> Box<dyn CriterionParser> {
        match self.clone() {
            ParserDecl::Population { id, target } => Box::new(PopulationParser { id, target }),
            ParserDecl::ScalarRange { id, target } => Box::new(ScalarRangeParser { id, target }),
            ParserDecl::NoiseLevels { id, targets } => Box::new(NoiseLevelsParser { id, targets }),
            ParserDecl::PolicySet {
                id,
                target,
                universe,
                size_target,
            } => Box::new(PolicySetParser {
                id,
                target,
                universe,
                size_target,
            }),
        }
    }
}

/// Parser bindings, normally read from `<project>/config/criteria.yaml`.
///
/// The defaults target the reference simulator's input schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaBindings {
    pub parsers: Vec<ParserDecl>,
}

impl Default for CriteriaBindings {
    fn default() -> Self {
        let count = AttrTarget::new("/refsim/agents", "count");
        let population = |id: &str| ParserDecl::Population {
            id: id.to_string(),
            target: count.clone(),
        };
        CriteriaBindings {
            parsers: vec![
                population("population_size"),
                population("n_agents"),
                population("system"),
                ParserDecl::ScalarRange {
                    id: "vel".into(),
                    target: AttrTarget::new("/refsim/agents", "velocity"),
                },
                ParserDecl::NoiseLevels {
                    id: "saa_noise".into(),
                    targets: vec![AttrTarget::new("/refsim/agents", "noise")],
                },
                ParserDecl::PolicySet {
                    id: "ta_policy_set".into(),
                    target: AttrTarget::new("/refsim/agents", "policy"),
                    universe: vec!["alpha".into(), "beta".into(), "gamma".into()],
                    size_target: Some(count),
                },
            ],
        }
    }
}

impl CriteriaBindings {
    /// Replaces same-id declarations and appends new ones.
    pub fn merge(&mut self, other: CriteriaBindings) {
        for decl in other.parsers {
            match self.parsers.iter_mut().find(|d| d.id() == decl.id()) {
                Some(slot) => *slot = decl,
                None => self.parsers.push(decl),
            }
        }
    }
}

/// Formats a number so that it round-trips through `parse`.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

/// Parses a token literal where `p` stands for the decimal point.
pub fn parse_number(raw: &str) -> Option<f64> {
    raw.replace('p', ".").parse::<f64>().ok().filter(|v| v.is_finite())
}

fn to_token_number(v: f64) -> String {
    format_number(v).replace('.', "p")
}

fn parse_count(spec: &CriterionSpec, offset: usize, raw: &str) -> Result<u64> {
    match raw.parse::<u64>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(spec.error(offset, format!("expected a positive integer, found '{raw}'"))),
    }
}

/// Inclusive linear spacing: `min + j*(max-min)/(k-1)`; `k == 1` gives `min`.
pub(crate) fn linspace(min: f64, max: f64, k: u64) -> Vec<f64> {
    if k == 1 {
        return vec![min];
    }
    (0..k)
        .map(|j| {
            if j == k - 1 {
                max
            } else {
                min + j as f64 * (max - min) / (k - 1) as f64
            }
        })
        .collect()
}

/// `LogN`, `LinearN`, bare `N`, or `ZN` (a single fixed size).
pub struct PopulationParser {
    pub id: String,
    pub target: AttrTarget,
}

impl CriterionParser for PopulationParser {
    fn id(&self) -> &str {
        &self.id
    }

    fn parse(&self, spec: &CriterionSpec) -> Result<CriterionDef> {
        let segs = spec.segments();
        let (offset, seg) = match segs.as_slice() {
            [one] => *one,
            [] => return Err(spec.error(spec.raw_token.len(), "missing size segment")),
            [_, (off, _), ..] => return Err(spec.error(*off, "unexpected extra segment")),
        };
        let (kind, sizes): (CriterionKind, Vec<u64>) = if let Some(n) = seg.strip_prefix("Log") {
            let n = parse_count(spec, offset + 3, n)?;
            let top = 63 - n.leading_zeros();
            (CriterionKind::PopulationLog, (0..=top).map(|p| 1u64 << p).collect())
        } else if let Some(n) = seg.strip_prefix("Linear") {
            let n = parse_count(spec, offset + 6, n)?;
            (CriterionKind::PopulationLinear, (1..=n).collect())
        } else if let Some(n) = seg.strip_prefix('Z') {
            let n = parse_count(spec, offset + 1, n)?;
            (CriterionKind::PopulationLinear, vec![n])
        } else if seg.chars().next().is_some_and(|c| c.is_ascii_digit()) {
            let n = parse_count(spec, offset, seg)?;
            (CriterionKind::PopulationLinear, (1..=n).collect())
        } else {
            return Err(spec.error(offset, format!("unknown series code '{seg}'")));
        };
        let values = sizes
            .into_iter()
            .map(|n| ValuePoint {
                label: format!("size={n}"),
                changes: AttributeChangeSet(vec![self.target.set(n.to_string())]),
            })
            .collect();
        CriterionDef::new(&spec.raw_token, kind, values)
    }

    fn format_value(&self, value: &ValuePoint) -> Option<String> {
        let n = value.label.strip_prefix("size=")?;
        Some(format!("{}.Z{n}", self.id))
    }
}

/// `min=<a>.max=<b>.C<k>`: k inclusive, equally spaced values.
pub struct ScalarRangeParser {
    pub id: String,
    pub target: AttrTarget,
}

struct RangeSegments {
    min: Option<f64>,
    max: Option<f64>,
    count: Option<u64>,
    count_offset: usize,
}

fn range_segments<'a>(
    spec: &CriterionSpec,
    segs: impl IntoIterator<Item = (usize, &'a str)>,
) -> Result<RangeSegments> {
    let mut out = RangeSegments {
        min: None,
        max: None,
        count: None,
        count_offset: spec.raw_token.len(),
    };
    for (offset, seg) in segs {
        if let Some(v) = seg.strip_prefix("min=") {
            out.min = Some(
                parse_number(v).ok_or_else(|| spec.error(offset + 4, format!("bad number '{v}'")))?,
            );
        } else if let Some(v) = seg.strip_prefix("max=") {
            out.max = Some(
                parse_number(v).ok_or_else(|| spec.error(offset + 4, format!("bad number '{v}'")))?,
            );
        } else if let Some(k) = seg.strip_prefix('C') {
            out.count = Some(parse_count(spec, offset + 1, k)?);
            out.count_offset = offset;
        } else {
            return Err(spec.error(offset, format!("unknown segment '{seg}'")));
        }
    }
    Ok(out)
}

impl CriterionParser for ScalarRangeParser {
    fn id(&self) -> &str {
        &self.id
    }

    fn parse(&self, spec: &CriterionSpec) -> Result<CriterionDef> {
        let r = range_segments(spec, spec.segments())?;
        let end = spec.raw_token.len();
        let min = r.min.ok_or_else(|| spec.error(end, "missing min=<value>"))?;
        let max = r.max.ok_or_else(|| spec.error(end, "missing max=<value>"))?;
        let k = r.count.ok_or_else(|| spec.error(end, "missing C<count>"))?;
        if k > 1 && min == max {
            return Err(spec.error(r.count_offset, "min == max with more than one value"));
        }
        let values = linspace(min, max, k)
            .into_iter()
            .map(|v| ValuePoint {
                label: format!("{}={}", self.id, format_number(v)),
                changes: AttributeChangeSet(vec![self.target.set(format_number(v))]),
            })
            .collect();
        CriterionDef::new(&spec.raw_token, CriterionKind::ScalarRange, values)
    }

    fn format_value(&self, value: &ValuePoint) -> Option<String> {
        let v = parse_number(value.label.strip_prefix(&format!("{}=", self.id))?)?;
        let t = to_token_number(v);
        Some(format!("{}.min={t}.max={t}.C1", self.id))
    }
}

/// `[all.]C<k>` gives levels j/k for j = 1..=k; explicit `min=`/`max=`
/// switch to inclusive spacing like a scalar range. Every target receives
/// the same level.
pub struct NoiseLevelsParser {
    pub id: String,
    pub targets: Vec<AttrTarget>,
}

impl CriterionParser for NoiseLevelsParser {
    fn id(&self) -> &str {
        &self.id
    }

    fn parse(&self, spec: &CriterionSpec) -> Result<CriterionDef> {
        let segs = spec.segments();
        let rest = segs.iter().copied().filter(|(_, s)| *s != "all");
        let r = range_segments(spec, rest)?;
        let k = r
            .count
            .ok_or_else(|| spec.error(spec.raw_token.len(), "missing C<levels>"))?;
        let levels: Vec<f64> = match (r.min, r.max) {
            (None, None) => (1..=k).map(|j| j as f64 / k as f64).collect(),
            (Some(min), Some(max)) => {
                if k > 1 && min == max {
                    return Err(spec.error(r.count_offset, "min == max with more than one level"));
                }
                linspace(min, max, k)
            }
            _ => return Err(spec.error(r.count_offset, "min= and max= must be given together")),
        };
        let values = levels
            .into_iter()
            .map(|v| ValuePoint {
                label: format!("noise={}", format_number(v)),
                changes: self.targets.iter().map(|t| t.set(format_number(v))).collect(),
            })
            .collect();
        CriterionDef::new(&spec.raw_token, CriterionKind::NoiseLevels, values)
    }

    fn format_value(&self, value: &ValuePoint) -> Option<String> {
        let v = parse_number(value.label.strip_prefix("noise=")?)?;
        let t = to_token_number(v);
        Some(format!("{}.all.min={t}.max={t}.C1", self.id))
    }
}

/// `all` or `a+b+...` members of the configured universe, optionally with
/// `Z<n>` fixing the population for every experiment.
pub struct PolicySetParser {
    pub id: String,
    pub target: AttrTarget,
    pub universe: Vec<String>,
    pub size_target: Option<AttrTarget>,
}

impl CriterionParser for PolicySetParser {
    fn id(&self) -> &str {
        &self.id
    }

    fn parse(&self, spec: &CriterionSpec) -> Result<CriterionDef> {
        let mut members: Option<Vec<String>> = None;
        let mut size: Option<u64> = None;
        for (offset, seg) in spec.segments() {
            if let Some(n) = seg.strip_prefix('Z').filter(|n| n.chars().all(|c| c.is_ascii_digit())) {
                size = Some(parse_count(spec, offset + 1, n)?);
            } else if seg == "all" {
                members = Some(self.universe.clone());
            } else {
                let mut picked = Vec::new();
                let mut off = offset;
                for name in seg.split('+') {
                    if !self.universe.iter().any(|u| u == name) {
                        return Err(spec.error(
                            off,
                            format!("'{name}' is not one of {}", self.universe.join(", ")),
                        ));
                    }
                    picked.push(name.to_string());
                    off += name.len() + 1;
                }
                members = Some(picked);
            }
        }
        let members = members
            .ok_or_else(|| spec.error(spec.raw_token.len(), "missing policy selection ('all' or a+b)"))?;
        let size_change = match (size, &self.size_target) {
            (Some(n), Some(t)) => Some(t.set(n.to_string())),
            (Some(_), None) => {
                return Err(spec.error(0, "Z<n> given but no size target is configured"))
            }
            (None, _) => None,
        };
        let values = members
            .into_iter()
            .map(|m| {
                let mut changes = AttributeChangeSet(vec![self.target.set(m.clone())]);
                if let Some(c) = &size_change {
                    changes.push(c.clone());
                }
                ValuePoint {
                    label: format!("policy={m}"),
                    changes,
                }
            })
            .collect();
        let mut def = CriterionDef::new(&spec.raw_token, CriterionKind::PolicySet, values)?;
        if let Some(n) = size {
            def.fixed_context = BTreeMap::from([("size".to_string(), n as f64)]);
        }
        Ok(def)
    }

    fn format_value(&self, value: &ValuePoint) -> Option<String> {
        let name = value.label.strip_prefix("policy=")?;
        let size = self
            .size_target
            .as_ref()
            .and_then(|t| t.value_in(&value.changes));
        Some(match size {
            Some(n) => format!("{}.{name}.Z{n}", self.id),
            None => format!("{}.{name}", self.id),
        })
    }
}
