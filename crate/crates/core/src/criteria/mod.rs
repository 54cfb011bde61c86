//! Batch-criteria DSL.
//!
//! A criterion token is a dot-separated word such as
//! `population_size.Log128` or `vel.min=1p0.max=10p0.C10`. The first segment
//! selects a parser; the rest is parser-specific. Because `.` separates
//! segments, numeric literals use `p` as the decimal point (`1p5` is 1.5).
//!
//! One token gives a univariate batch; two tokens give a bivariate batch
//! whose experiments form a row-major grid (first token = rows).

mod grid;
mod parsers;
mod registry;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xml::AttributeChangeSet;

pub use grid::{expand_grid, ExperimentPoint};
pub use parsers::{
    format_number, parse_number, AttrTarget, CriteriaBindings, ParserDecl, PolicySetParser,
    PopulationParser, NoiseLevelsParser, ScalarRangeParser,
};
pub use registry::{CriterionParser, ParserRegistry};

/// One CLI word naming a criterion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub raw_token: String,
    pub parser_id: String,
}

impl CriterionSpec {
    pub fn new(token: &str) -> Result<Self> {
        if token.is_empty() || token.contains(char::is_whitespace) {
            return Err(Error::CriterionParse {
                token: token.to_string(),
                offset: 0,
                msg: "criterion tokens must be non-empty and contain no whitespace".into(),
            });
        }
        let parser_id = token.split('.').next().unwrap_or(token).to_string();
        Ok(CriterionSpec {
            raw_token: token.to_string(),
            parser_id,
        })
    }

    /// Segments after the parser id, each with its byte offset in the token.
    pub fn segments(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut offset = self.parser_id.len() + 1;
        if self.raw_token.len() <= self.parser_id.len() {
            return out;
        }
        for seg in self.raw_token[self.parser_id.len() + 1..].split('.') {
            out.push((offset, seg));
            offset += seg.len() + 1;
        }
        out
    }

    pub(crate) fn error(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::CriterionParse {
            token: self.raw_token.clone(),
            offset,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    PopulationLog,
    PopulationLinear,
    ScalarRange,
    PolicySet,
    NoiseLevels,
    Custom,
}

impl CriterionKind {
    /// Axes whose values are geometrically spaced.
    pub fn is_geometric(self) -> bool {
        matches!(self, CriterionKind::PopulationLog)
    }
}

/// One value of an independent variable and the XML edits realizing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuePoint {
    pub label: String,
    pub changes: AttributeChangeSet,
}

impl ValuePoint {
    /// Numeric part of a `name=value` label, if there is one.
    pub fn numeric(&self) -> Option<f64> {
        label_numeric(&self.label)
    }
}

/// Numeric part of a value label such as `size=4`.
pub fn label_numeric(label: &str) -> Option<f64> {
    let raw = label.rsplit('=').next()?;
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A fully expanded axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionDef {
    pub token: String,
    pub kind: CriterionKind,
    pub values: Vec<ValuePoint>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fixed_context: BTreeMap<String, f64>,
}

impl CriterionDef {
    pub fn new(token: &str, kind: CriterionKind, values: Vec<ValuePoint>) -> Result<Self> {
        let def = CriterionDef {
            token: token.to_string(),
            kind,
            values,
            fixed_context: BTreeMap::new(),
        };
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Error::CriterionParse {
            token: self.token.clone(),
            offset: 0,
            msg,
        };
        if self.values.is_empty() {
            return Err(err("criterion expands to no values".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.values {
            if !seen.insert(v.label.as_str()) {
                return Err(err(format!("duplicate value '{}'", v.label)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.values.iter().map(|v| v.label.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    Univariate,
    Bivariate,
}

/// The parsed criteria of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCriteria {
    pub axis_a: CriterionDef,
    pub axis_b: Option<CriterionDef>,
}

impl BatchCriteria {
    pub fn arity(&self) -> Arity {
        if self.axis_b.is_some() {
            Arity::Bivariate
        } else {
            Arity::Univariate
        }
    }

    /// (rows, cols); univariate batches are a single column.
    pub fn shape(&self) -> (usize, usize) {
        (
            self.axis_a.len(),
            self.axis_b.as_ref().map_or(1, |b| b.len()),
        )
    }

    pub fn cardinality(&self) -> usize {
        let (r, c) = self.shape();
        r * c
    }

    pub fn tokens(&self) -> Vec<String> {
        let mut t = vec![self.axis_a.token.clone()];
        if let Some(b) = &self.axis_b {
            t.push(b.token.clone());
        }
        t
    }
}

/// Tokens from `--batch-criteria`, before parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CriteriaTokens {
    Univariate(CriterionSpec),
    Bivariate(CriterionSpec, CriterionSpec),
}

impl CriteriaTokens {
    pub fn specs(&self) -> Vec<&CriterionSpec> {
        match self {
            CriteriaTokens::Univariate(a) => vec![a],
            CriteriaTokens::Bivariate(a, b) => vec![a, b],
        }
    }

    pub fn raw(&self) -> Vec<String> {
        self.specs().iter().map(|s| s.raw_token.clone()).collect()
    }
}

pub fn tokenize_cli_criteria<S: AsRef<str>>(args: &[S]) -> Result<CriteriaTokens> {
    match args {
        [a] => Ok(CriteriaTokens::Univariate(CriterionSpec::new(a.as_ref())?)),
        [a, b] => Ok(CriteriaTokens::Bivariate(
            CriterionSpec::new(a.as_ref())?,
            CriterionSpec::new(b.as_ref())?,
        )),
        _ => Err(Error::Usage(format!(
            "--batch-criteria takes 1 or 2 tokens, got {}",
            args.len()
        ))),
    }
}

/// Directory-safe name for a set of criteria tokens.
pub fn criteria_slug(tokens: &[String]) -> String {
    tokens
        .iter()
        .map(|t| t.replace('/', "_"))
        .collect::<Vec<_>>()
        .join("+")
}
