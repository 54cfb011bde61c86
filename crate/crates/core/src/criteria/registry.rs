use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;

use serde::Deserialize;

use super::parsers::CriteriaBindings;
use super::{BatchCriteria, CriteriaTokens, CriterionDef, CriterionKind, CriterionSpec, ValuePoint};
use crate::error::{Error, Result};
use crate::plugin::{PluginPath, PluginType};

/// Turns one criterion token into an expanded axis.
pub trait CriterionParser: Send + Sync {
    fn id(&self) -> &str;

    fn parse(&self, spec: &CriterionSpec) -> Result<CriterionDef>;

    /// A token that parses to exactly `value`, when the parser can express one.
    fn format_value(&self, _value: &ValuePoint) -> Option<String> {
        None
    }
}

/// Parsers by id. Built once at startup, read-only afterwards.
#[derive(Default)]
pub struct ParserRegistry {
    parsers: BTreeMap<String, Box<dyn CriterionParser>>,
}

impl ParserRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        Self::with_bindings(&CriteriaBindings::default())
    }

    pub fn with_bindings(bindings: &CriteriaBindings) -> Self {
        let mut reg = Self::empty();
        for decl in &bindings.parsers {
            reg.register(decl.build());
        }
        reg
    }

    /// Registers a parser unless one with the same id already exists.
    pub fn register(&mut self, parser: Box<dyn CriterionParser>) -> bool {
        let id = parser.id().to_string();
        if self.parsers.contains_key(&id) {
            return false;
        }
        self.parsers.insert(id, parser);
        true
    }

    /// Adds `type: criteria` plugins found on `path`. Ids already registered
    /// (built-ins, earlier path entries) win.
    pub fn load_plugins(&mut self, path: &PluginPath) -> Result<()> {
        for found in path.discover(PluginType::Criteria)? {
            let manifest: CriteriaPluginManifest = found.load()?;
            if manifest.values.is_none() && manifest.command.is_none() {
                return Err(Error::Plugin(format!(
                    "{}: criteria plugin needs 'values' or 'command'",
                    found.manifest_path().display()
                )));
            }
            self.register(Box::new(PluginParser {
                id: found.id.clone(),
                dir: found.dir.clone(),
                values: manifest.values,
                command: manifest.command,
            }));
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<&str> {
        self.parsers.keys().map(String::as_str).collect()
    }

    pub fn get(&self, id: &str) -> Option<&dyn CriterionParser> {
        self.parsers.get(id).map(|p| p.as_ref())
    }

    /// Finds the parser for `spec`. A parser id with a trailing number and
    /// no segments (`system100`) is read as `<id>.<number>`.
    pub fn lookup(&self, spec: &CriterionSpec) -> Result<(&dyn CriterionParser, CriterionSpec)> {
        if let Some(p) = self.get(&spec.parser_id) {
            return Ok((p, spec.clone()));
        }
        let prefix = spec.parser_id.trim_end_matches(|c: char| c.is_ascii_digit());
        if !prefix.is_empty() && prefix.len() < spec.parser_id.len() {
            if let Some(p) = self.get(prefix) {
                let rewritten = format!(
                    "{prefix}.{}",
                    &spec.raw_token[prefix.len()..]
                );
                return Ok((p, CriterionSpec::new(&rewritten)?));
            }
        }
        Err(Error::NoParser(spec.raw_token.clone()))
    }

    pub fn parse(&self, spec: &CriterionSpec) -> Result<CriterionDef> {
        let (parser, effective) = self.lookup(spec)?;
        let mut def = parser.parse(&effective)?;
        def.token = spec.raw_token.clone();
        def.validate()?;
        Ok(def)
    }

    pub fn parse_tokens(&self, tokens: &CriteriaTokens) -> Result<BatchCriteria> {
        Ok(match tokens {
            CriteriaTokens::Univariate(a) => BatchCriteria {
                axis_a: self.parse(a)?,
                axis_b: None,
            },
            CriteriaTokens::Bivariate(a, b) => BatchCriteria {
                axis_a: self.parse(a)?,
                axis_b: Some(self.parse(b)?),
            },
        })
    }

    pub fn parse_raw(&self, tokens: &[String]) -> Result<BatchCriteria> {
        self.parse_tokens(&super::tokenize_cli_criteria(tokens)?)
    }
}

#[derive(Debug, Deserialize)]
struct CriteriaPluginManifest {
    #[serde(default)]
    values: Option<Vec<ValuePoint>>,
    #[serde(default)]
    command: Option<String>,
}

/// A parser defined on the plugin path, either by a fixed value list or by
/// an executable that receives the token as its only argument and prints a
/// YAML list of `{label, changes}` on stdout.
struct PluginParser {
    id: String,
    dir: PathBuf,
    values: Option<Vec<ValuePoint>>,
    command: Option<String>,
}

impl CriterionParser for PluginParser {
    fn id(&self) -> &str {
        &self.id
    }

    fn parse(&self, spec: &CriterionSpec) -> Result<CriterionDef> {
        if let Some(values) = &self.values {
            return CriterionDef::new(&spec.raw_token, CriterionKind::Custom, values.clone());
        }
        let command = self.command.as_deref().unwrap_or_default();
        let local = self.dir.join(command);
        let program = if local.is_file() { local } else { PathBuf::from(command) };
        let output = Command::new(&program)
            .arg(&spec.raw_token)
            .current_dir(&self.dir)
            .output()
            .map_err(|e| Error::Plugin(format!("{}: {e}", program.display())))?;
        if !output.status.success() {
            return Err(spec.error(
                0,
                format!(
                    "parser plugin '{}' failed: {}",
                    self.id,
                    String::from_utf8_lossy(&output.stderr).trim()
                ),
            ));
        }
        let values: Vec<ValuePoint> = serde_yaml::from_slice(&output.stdout)
            .map_err(|e| spec.error(0, format!("parser plugin '{}' output: {e}", self.id)))?;
        CriterionDef::new(&spec.raw_token, CriterionKind::Custom, values)
    }
}
