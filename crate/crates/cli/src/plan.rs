use std::fmt;
use std::path::PathBuf;

use xbatch_core::criteria::tokenize_cli_criteria;
use xbatch_core::{BatchLayout, Error, PluginPath, Result};

use crate::args::Args;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate = 1,
    Execute = 2,
    Process = 3,
    Deliver = 4,
    Compare = 5,
}

impl Stage {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Stage::Generate),
            2 => Some(Stage::Execute),
            3 => Some(Stage::Process),
            4 => Some(Stage::Deliver),
            5 => Some(Stage::Compare),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Execute => "execute",
            Stage::Process => "process",
            Stage::Deliver => "deliver",
            Stage::Compare => "compare",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} ({})", self.number(), self.name())
    }
}

#[derive(Debug, Clone)]
pub struct PipelinePlan {
    pub stages: Vec<Stage>,
    /// Batch root for stages 1-4.
    pub batch: Option<BatchLayout>,
    pub args: Args,
    pub plugin_path: PluginPath,
}

impl PipelinePlan {
    pub fn has(&self, s: Stage) -> bool {
        self.stages.contains(&s)
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_stages(args: &Args) -> Result<Vec<Stage>> {
    if args.pipeline.is_empty() {
        return Ok(if args.compare.is_empty() {
            vec![Stage::Generate, Stage::Execute, Stage::Process, Stage::Deliver]
        } else {
            vec![Stage::Compare]
        });
    }
    let stages = args
        .pipeline
        .iter()
        .map(|&n| Stage::from_number(n).ok_or_else(|| usage(format!("--pipeline: unknown stage {n} (stages are 1-5)"))))
        .collect::<Result<Vec<_>>>()?;
    if stages.windows(2).any(|w| w[0] >= w[1]) {
        let given: Vec<String> = args.pipeline.iter().map(u8::to_string).collect();
        return Err(usage(format!(
            "--pipeline stages must be strictly increasing, got {}",
            given.join(" ")
        )));
    }
    Ok(stages)
}

fn require<'a, T>(v: &'a Option<T>, flag: &str, stage: Stage) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| usage(format!("{flag} is required for {stage}")))
}

/// Validates `args` into a plan, including on-disk prerequisites of the
/// selected stages.
pub fn build_plan(args: Args, plugin_path: PluginPath) -> Result<PipelinePlan> {
    let stages = parse_stages(&args)?;
    let has = |s: Stage| stages.contains(&s);

    if !args.compare.is_empty() && !has(Stage::Compare) {
        return Err(usage("--compare only applies to stage 5; add 5 to --pipeline"));
    }
    if has(Stage::Compare) {
        if args.compare.len() < 2 {
            return Err(usage("--compare needs at least two comma-separated batch roots for stage 5"));
        }
        require(&args.compare_target, "--compare-target", Stage::Compare)?;
        require(&args.compare_output_root, "--compare-output-root", Stage::Compare)?;
        for root in &args.compare {
            if !BatchLayout::new(root).manifest_path().is_file() {
                return Err(Error::Config(format!(
                    "--compare: {} is not a batch root (no manifest.yaml)",
                    root.display()
                )));
            }
        }
    }
    if args.no_master_node {
        log::warn!("--no-master-node has no effect on the supported platforms; ignoring it");
    }

    let batch_stages: Vec<Stage> = stages.iter().copied().filter(|&s| s != Stage::Compare).collect();
    let mut batch = None;
    if let Some(&first) = batch_stages.first() {
        if has(Stage::Generate) {
            require(&args.template_input_file, "--template-input-file", Stage::Generate)?;
            require(&args.n_runs, "--n-runs", Stage::Generate)?;
            require(&args.exp_setup, "--exp-setup", Stage::Generate)?;
            if args.batch_criteria.is_empty() {
                return Err(usage(format!("--batch-criteria is required for {}", Stage::Generate)));
            }
        }
        let layout = match &args.batch_root {
            Some(root) => BatchLayout::new(root),
            None => {
                if args.batch_criteria.is_empty() {
                    return Err(usage(format!(
                        "--batch-criteria (or --batch-root) is required for {first}"
                    )));
                }
                let tokens = tokenize_cli_criteria(&args.batch_criteria)?;
                BatchLayout::for_batch(
                    &args.sierra_root,
                    &args.project,
                    args.controller.as_deref(),
                    args.scenario.as_deref(),
                    &tokens.raw(),
                )
            }
        };
        // Remote launch wrappers cd into the root from another cwd.
        let root = std::path::absolute(&layout.root)
            .map_err(|e| Error::io(&layout.root, e))?;
        let layout = BatchLayout::new(root);
        if !has(Stage::Generate) {
            check_prerequisites(&layout, &batch_stages)?;
        }
        batch = Some(layout);
    }

    Ok(PipelinePlan {
        stages,
        batch,
        args,
        plugin_path,
    })
}

fn check_prerequisites(layout: &BatchLayout, stages: &[Stage]) -> Result<()> {
    let missing = |what: PathBuf, stage: Stage, produce: Stage| {
        Err(Error::Config(format!(
            "{stage} needs {}, which does not exist; run {produce} first",
            what.display()
        )))
    };
    let first = stages[0];
    if !layout.manifest_path().is_file() {
        return missing(layout.manifest_path(), first, Stage::Generate);
    }
    match first {
        Stage::Execute if !layout.exp_inputs().is_dir() => missing(layout.exp_inputs(), first, Stage::Generate),
        Stage::Process if !layout.exp_outputs().is_dir() => missing(layout.exp_outputs(), first, Stage::Execute),
        Stage::Deliver if !layout.statistics().is_dir() => missing(layout.statistics(), first, Stage::Process),
        _ => Ok(()),
    }
}
