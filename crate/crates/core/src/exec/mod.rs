//! Stage 2: per-experiment command files and their dispatch.

mod env;
mod run;
mod submit;

use std::fs;
use std::path::Path;

use crate::error::{Error, IoContext, Result};
use crate::expgen::{BatchLayout, Manifest, SeedTable};
use crate::fsutil;
use crate::platform::PlatformPlugin;

pub use env::{expand_hostlist, EnvOptions, ExecEnvAdapter, Node, Slot};
pub use run::{dispatch_plan, run_batch, ExecOptions, ExecResult, PlanEntry, RunResult};
pub use submit::{emit_submit_script, parse_walltime, SubmitResources};

pub const ENV_LOCAL: &str = "hpc.local";
pub const ENV_SLURM: &str = "hpc.slurm";
pub const ENV_PBS: &str = "hpc.pbs";
pub const ENV_ADHOC: &str = "hpc.adhoc";

/// Inclusive range of experiment indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpRange {
    pub lo: usize,
    pub hi: usize,
}

impl ExpRange {
    pub fn full(cardinality: usize) -> Result<Self> {
        if cardinality == 0 {
            return Err(Error::Range {
                range: String::new(),
                msg: "batch has no experiments".into(),
            });
        }
        Ok(ExpRange {
            lo: 0,
            hi: cardinality - 1,
        })
    }

    /// Parses `L:H`; `None` selects the whole batch.
    pub fn parse(raw: Option<&str>, cardinality: usize) -> Result<Self> {
        let Some(raw) = raw else {
            return Self::full(cardinality);
        };
        let err = |msg: String| Error::Range {
            range: raw.to_string(),
            msg,
        };
        let (lo, hi) = raw
            .split_once(':')
            .ok_or_else(|| err("expected <lo>:<hi>".into()))?;
        let lo: usize = lo
            .trim()
            .parse()
            .map_err(|_| err(format!("'{lo}' is not an experiment index")))?;
        let hi: usize = hi
            .trim()
            .parse()
            .map_err(|_| err(format!("'{hi}' is not an experiment index")))?;
        if lo > hi {
            return Err(err(format!("lower bound {lo} exceeds upper bound {hi}")));
        }
        if hi >= cardinality {
            return Err(err(format!(
                "upper bound {hi} is outside the batch (cardinality {cardinality})"
            )));
        }
        Ok(ExpRange { lo, hi })
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, exp: usize) -> bool {
        (self.lo..=self.hi).contains(&exp)
    }
}

/// One shell line per run, in run order. Paths are relative to the batch
/// root, which is the working directory of every dispatched line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandFile {
    pub exp: usize,
    pub lines: Vec<String>,
}

impl CommandFile {
    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    pub fn write(&self, layout: &BatchLayout) -> Result<()> {
        let dir = layout.exp_output_dir(self.exp);
        fs::create_dir_all(&dir).at(&dir)?;
        fsutil::write_atomic(&layout.commands_path(self.exp), self.render())
    }
}

fn rel(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

/// Builds the command file of `exp` from the platform launch template.
pub fn generate_command_file(
    layout: &BatchLayout,
    manifest: &Manifest,
    platform: &PlatformPlugin,
    seeds: &SeedTable,
    exp: usize,
) -> Result<CommandFile> {
    if manifest.n_runs == 0 {
        return Err(Error::Usage("experiment has no runs".into()));
    }
    let missing: Vec<usize> = (0..manifest.n_runs)
        .filter(|&r| !layout.input_xml(exp, r).is_file())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingRuns { exp, missing });
    }
    let lines = (0..manifest.n_runs)
        .map(|run| {
            let out_dir = layout.relative(&layout.run_output_dir(exp, run)).to_path_buf();
            let depth = out_dir.components().count();
            let up = "../".repeat(depth);
            let input = format!("{up}{}", rel(layout.relative(&layout.input_xml(exp, run))));
            let launch = platform.launch_command(&input, seeds.seed(exp, run));
            format!("cd {} && {launch} > run.log 2>&1", rel(&out_dir))
        })
        .collect();
    Ok(CommandFile { exp, lines })
}
