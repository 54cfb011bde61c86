use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use xbatch_core::compare::{compare, AsLines, ComparisonSpec};
use xbatch_core::deliverables::{generate_deliverables, DeliverableOptions, ModelRef, VideoOptions};
use xbatch_core::exec::{dispatch_plan, run_batch, EnvOptions, ExecEnvAdapter, ExecOptions, ExpRange};
use xbatch_core::expgen::{generate_batch, ExpSetup, ExtraChanges, GenerateRequest, SeedTable};
use xbatch_core::results::{process_batch, Storage, StatsOptions};
use xbatch_core::{resolve_platform, BatchLayout, Manifest, Project, XmlTree};

use crate::plan::{PipelinePlan, Stage};

#[derive(Debug, Clone, Serialize)]
pub struct StageEvent {
    pub time: String,
    pub stage: u8,
    pub name: &'static str,
    pub outcome: &'static str,
    pub wall_s: f64,
    pub detail: String,
}

/// Outcome of a stage that ran to completion.
enum Done {
    Ok(String),
    /// Ok, and later stages must not run (dry runs).
    Stop(String),
}

fn append_event(path: &Path, ev: &StageEvent) {
    let line = match serde_json::to_string(ev) {
        Ok(l) => l,
        Err(_) => return,
    };
    let Some(dir) = path.parent() else { return };
    if !dir.is_dir() {
        return;
    }
    let res = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| writeln!(f, "{line}"));
    if let Err(e) = res {
        log::warn!("cannot append to {}: {e}", path.display());
    }
}

fn layout(plan: &PipelinePlan) -> anyhow::Result<&BatchLayout> {
    plan.batch.as_ref().ok_or_else(|| anyhow!("no batch root selected"))
}

fn manifest(plan: &PipelinePlan) -> anyhow::Result<Manifest> {
    Ok(layout(plan)?.load_manifest()?)
}

fn stage_generate(plan: &PipelinePlan) -> anyhow::Result<Done> {
    let a = &plan.args;
    let pp = &plan.plugin_path;
    let layout = layout(plan)?;
    let project = Project::load(&a.project, pp)?;
    let criteria = project.registry(pp)?.parse_raw(&a.batch_criteria)?;
    let template_path = a.template_input_file.as_ref().context("--template-input-file")?;
    let template = XmlTree::load(template_path)?;
    let exp_setup = ExpSetup::parse(a.exp_setup.as_deref().context("--exp-setup")?)?;
    let platform = resolve_platform(&a.platform, pp)?;
    let extra: ExtraChanges = project.extra_changes(a.controller.as_deref(), a.robot.as_deref())?;
    let n_runs = a.n_runs.context("--n-runs")?;

    let master_seed = match a.master_seed {
        Some(s) => s,
        None => match SeedTable::load(&layout.seeds_path()) {
            Ok(t) => t.master_seed,
            Err(_) => rand::random::<u64>(),
        },
    };
    let req = GenerateRequest {
        layout: layout.clone(),
        template: &template,
        criteria: &criteria,
        n_runs,
        exp_setup,
        platform: &platform,
        extra: &extra,
        master_seed,
        force_regen: a.force_regen,
        platform_vc: a.platform_vc,
        project: project.name.clone(),
        exec_env: a.exec_env.clone(),
        controller: a.controller.clone(),
        robot: a.robot.clone(),
        scenario: a.scenario.clone(),
        flags: a.snapshot(),
    };
    let m = generate_batch(&req)?;
    Ok(Done::Ok(format!(
        "{} experiments x {} runs in {}",
        m.cardinality,
        m.n_runs,
        layout.root.display()
    )))
}

fn adapter(plan: &PipelinePlan) -> anyhow::Result<ExecEnvAdapter> {
    let a = &plan.args;
    let opts = EnvOptions {
        jobs_per_node: a.exec_jobs_per_node,
        nodefile: a.nodefile.clone(),
        remote_shell: a.exec_remote_shell.clone(),
        vars: Default::default(),
    }
    .with_process_env();
    Ok(ExecEnvAdapter::from_id(&a.exec_env, &opts)?)
}

fn exe_dir() -> Vec<PathBuf> {
    std::env::current_exe()
        .ok()
        .and_then(|p| p.parent().map(Path::to_path_buf))
        .into_iter()
        .collect()
}

fn stage_execute(plan: &PipelinePlan) -> anyhow::Result<Done> {
    let a = &plan.args;
    let layout = layout(plan)?;
    let m = manifest(plan)?;
    let platform = resolve_platform(&m.platform, &plan.plugin_path)?;
    let range = ExpRange::parse(a.exp_range.as_deref(), m.cardinality)?;
    let adapter = adapter(plan)?;
    if a.exec_dry_run {
        let entries = dispatch_plan(layout, &m, &platform, &adapter, range)?;
        let mut out = std::io::stdout().lock();
        for e in &entries {
            writeln!(out, "exp{} run{} {} slot{} :: {}", e.exp, e.run, e.host, e.slot, e.command)?;
        }
        return Ok(Done::Stop(format!(
            "dry run: {} command lines on {} ({} slots)",
            entries.len(),
            adapter.id,
            adapter.total_slots()
        )));
    }
    let opts = ExecOptions {
        range,
        retry: a.retry,
        path_prefix: exe_dir(),
    };
    let results = run_batch(layout, &m, &platform, &adapter, &opts)?;
    let failed: usize = results.iter().map(|r| r.fail_count).sum();
    let total: usize = results.iter().map(|r| r.runs.len()).sum();
    if failed > 0 {
        let exps: Vec<String> = results
            .iter()
            .filter(|r| r.fail_count > 0)
            .map(|r| r.exp.to_string())
            .collect();
        bail!(
            "{failed} of {total} runs failed (experiments {}); see exec.yaml and run.log, then re-run with --exp-range",
            exps.join(", ")
        );
    }
    Ok(Done::Ok(format!(
        "{total} runs ok over experiments {}..={} on {}",
        range.lo, range.hi, adapter.id
    )))
}

fn stage_process(plan: &PipelinePlan) -> anyhow::Result<Done> {
    let a = &plan.args;
    let layout = layout(plan)?;
    let m = manifest(plan)?;
    let platform = resolve_platform(&m.platform, &plan.plugin_path)?;
    let opts = StatsOptions {
        range: ExpRange::parse(a.exp_range.as_deref(), m.cardinality)?,
        dist_stats: a.dist_stats.parse()?,
        reducer: a.reducer.parse()?,
        storage: Storage::resolve(&a.storage_medium, &plan.plugin_path)?,
    };
    let r = process_batch(layout, &m, &platform, &opts)?;
    let mut detail = format!("{} experiments, {} files", r.experiments, r.files_written);
    if r.runs_skipped > 0 {
        detail += &format!(", {} runs skipped", r.runs_skipped);
    }
    Ok(Done::Ok(detail))
}

fn stage_deliver(plan: &PipelinePlan) -> anyhow::Result<Done> {
    let a = &plan.args;
    let layout = layout(plan)?;
    let m = manifest(plan)?;
    let project = Project::load(&m.project, &plan.plugin_path)?;
    let opts = DeliverableOptions {
        range: ExpRange::parse(a.exp_range.as_deref(), m.cardinality)?,
        dist_stats: a.dist_stats.parse()?,
        video: VideoOptions {
            extra_opts: a.render_cmd_opts.clone().unwrap_or_default(),
            execute: a.render_exec,
            ..Default::default()
        },
        plugin_path: plan.plugin_path.clone(),
    };
    let r = generate_deliverables(layout, &m, &project.graphs, &opts)?;
    Ok(Done::Ok(format!(
        "{} documents, {} video commands, {} targets skipped",
        r.documents.len(),
        r.video_commands.len(),
        r.skipped.len()
    )))
}

fn stage_compare(plan: &PipelinePlan) -> anyhow::Result<Done> {
    let a = &plan.args;
    let target = a.compare_target.clone().context("--compare-target")?;
    let spec = ComparisonSpec {
        mode: a.compare_mode.parse()?,
        roots: a.compare.clone(),
        output_id: a.compare_output_id.clone().unwrap_or_else(|| target.clone()),
        target,
        output_root: a.compare_output_root.clone().context("--compare-output-root")?,
        as_lines: a.as_lines.as_deref().map(str::parse::<AsLines>).transpose()?,
        diff: a.compare_diff,
        models: a
            .compare_models
            .iter()
            .map(|m| ModelRef::parse_cli(m))
            .collect::<Result<_, _>>()?,
    };
    let out = compare(&spec, &plan.plugin_path)?;
    Ok(Done::Ok(format!(
        "{} documents in {}",
        out.documents.len(),
        spec.output_root.display()
    )))
}

/// Runs the selected stages in order and returns the exit code.
pub fn run_pipeline(plan: &PipelinePlan) -> i32 {
    for &stage in &plan.stages {
        let t0 = Instant::now();
        let result = match stage {
            Stage::Generate => stage_generate(plan),
            Stage::Execute => stage_execute(plan),
            Stage::Process => stage_process(plan),
            Stage::Deliver => stage_deliver(plan),
            Stage::Compare => stage_compare(plan),
        };
        let wall_s = (t0.elapsed().as_secs_f64() * 1000.0).round() / 1000.0;
        let (outcome, detail, stop, failed) = match &result {
            Ok(Done::Ok(d)) => ("ok", d.clone(), false, false),
            Ok(Done::Stop(d)) => ("ok", d.clone(), true, false),
            Err(e) => ("failed", format!("{e:#}"), true, true),
        };
        if failed {
            log::error!("{stage}: failed after {wall_s}s: {detail}");
        } else {
            log::info!("{stage}: ok in {wall_s}s: {detail}");
        }
        let ev = StageEvent {
            time: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            stage: stage.number(),
            name: stage.name(),
            outcome,
            wall_s,
            detail,
        };
        let events = match (stage, &plan.batch, &plan.args.compare_output_root) {
            (Stage::Compare, _, Some(root)) => Some(root.join("events.jsonl")),
            (_, Some(l), _) => Some(l.events_path()),
            _ => None,
        };
        if let Some(p) = events {
            append_event(&p, &ev);
        }
        if failed {
            return 1;
        }
        if stop {
            let rest: Vec<String> = plan
                .stages
                .iter()
                .filter(|s| **s > stage)
                .map(|s| s.number().to_string())
                .collect();
            if !rest.is_empty() {
                log::info!("dry run: not running stages {}", rest.join(" "));
            }
            break;
        }
    }
    0
}
