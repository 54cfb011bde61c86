//! Built-in dispatcher: experiments in index order, runs of one experiment
//! spread over the adapter's slots.

use std::collections::VecDeque;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{generate_command_file, CommandFile, ExecEnvAdapter, ExpRange};
use crate::error::{IoContext, Result};
use crate::expgen::{BatchLayout, Manifest, SeedTable};
use crate::fsutil;
use crate::platform::PlatformPlugin;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanEntry {
    pub exp: usize,
    pub run: usize,
    pub host: String,
    pub slot: usize,
    /// The command file line.
    pub core: String,
    /// `core` as carried to its host by the adapter.
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub host: String,
    pub ok: bool,
    pub exit_code: Option<i32>,
    pub attempts: u32,
    pub wall_time_s: f64,
    pub log: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub exp: usize,
    pub env: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_id: Option<String>,
    pub parallelism: usize,
    pub started: String,
    pub ok_count: usize,
    pub fail_count: usize,
    pub runs: Vec<RunResult>,
}

impl ExecResult {
    pub fn load(layout: &BatchLayout, exp: usize) -> Result<Self> {
        fsutil::read_yaml(&layout.exec_path(exp))
    }
}

#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub range: ExpRange,
    /// Extra attempts for a failed run.
    pub retry: u32,
    /// Directories put in front of `PATH` for dispatched lines.
    pub path_prefix: Vec<PathBuf>,
}

fn command_files(
    layout: &BatchLayout,
    manifest: &Manifest,
    platform: &PlatformPlugin,
    range: ExpRange,
) -> Result<Vec<CommandFile>> {
    let seeds = SeedTable::load(&layout.seeds_path())?;
    range
        .iter()
        .map(|exp| generate_command_file(layout, manifest, platform, &seeds, exp))
        .collect()
}

/// The full dispatch of `range` without running or writing anything.
/// Hosts are the nominal round-robin assignment; the dispatcher hands a
/// run to whichever slot frees up first.
pub fn dispatch_plan(
    layout: &BatchLayout,
    manifest: &Manifest,
    platform: &PlatformPlugin,
    adapter: &ExecEnvAdapter,
    range: ExpRange,
) -> Result<Vec<PlanEntry>> {
    let slots = adapter.slots(manifest.n_runs);
    let mut plan = Vec::new();
    for cf in command_files(layout, manifest, platform, range)? {
        for (run, core) in cf.lines.into_iter().enumerate() {
            let slot = &slots[run % slots.len()];
            plan.push(PlanEntry {
                exp: cf.exp,
                run,
                host: slot.host.clone(),
                slot: slot.index,
                command: adapter.wrap(&slot.host, &layout.root, &core),
                core,
            });
        }
    }
    Ok(plan)
}

struct Job {
    run: usize,
    core: String,
}

fn search_path(prefix: &[PathBuf]) -> Option<OsString> {
    if prefix.is_empty() {
        return None;
    }
    let mut dirs = prefix.to_vec();
    if let Some(p) = std::env::var_os("PATH") {
        dirs.extend(std::env::split_paths(&p));
    }
    std::env::join_paths(dirs).ok()
}

fn attempt(
    adapter: &ExecEnvAdapter,
    layout: &BatchLayout,
    path: Option<&OsString>,
    host: &str,
    core: &str,
) -> (Option<i32>, Option<String>) {
    let mut cmd = Command::new("sh");
    cmd.arg("-c")
        .arg(adapter.wrap(host, &layout.root, core))
        .current_dir(&layout.root)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped());
    if let Some(p) = path {
        cmd.env("PATH", p);
    }
    match cmd.output() {
        Ok(out) if out.status.success() => (Some(0), None),
        Ok(out) => {
            let stderr = String::from_utf8_lossy(&out.stderr).trim().to_string();
            let msg = match out.status.code() {
                Some(c) => format!("exited with status {c}"),
                None => "terminated by a signal".to_string(),
            };
            let msg = if stderr.is_empty() {
                msg
            } else {
                format!("{msg}: {stderr}")
            };
            (out.status.code(), Some(msg))
        }
        Err(e) => (None, Some(format!("failed to spawn: {e}"))),
    }
}

fn run_experiment(
    layout: &BatchLayout,
    adapter: &ExecEnvAdapter,
    opts: &ExecOptions,
    cf: &CommandFile,
) -> Result<ExecResult> {
    let n_runs = cf.lines.len();
    for run in 0..n_runs {
        let d = layout.run_output_dir(cf.exp, run);
        fs::create_dir_all(&d).at(&d)?;
    }
    let started = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let slots = adapter.slots(n_runs);
    let queue = Mutex::new(
        cf.lines
            .iter()
            .enumerate()
            .map(|(run, core)| Job {
                run,
                core: core.clone(),
            })
            .collect::<VecDeque<_>>(),
    );
    let path = search_path(&opts.path_prefix);
    let (tx, rx) = mpsc::channel::<RunResult>();

    std::thread::scope(|s| {
        for slot in &slots {
            let tx = tx.clone();
            let queue = &queue;
            let path = path.as_ref();
            s.spawn(move || loop {
                let Some(job) = queue.lock().unwrap_or_else(|e| e.into_inner()).pop_front() else {
                    break;
                };
                let t0 = Instant::now();
                let mut attempts = 0;
                let (code, error) = loop {
                    attempts += 1;
                    let (code, error) = attempt(adapter, layout, path, &slot.host, &job.core);
                    if error.is_none() || attempts > opts.retry {
                        break (code, error);
                    }
                    log::warn!("exp{} run{}: {}, retrying", cf.exp, job.run, error.as_deref().unwrap_or(""));
                };
                let log_path = layout.run_output_dir(cf.exp, job.run).join("run.log");
                let _ = tx.send(RunResult {
                    run: job.run,
                    host: slot.host.clone(),
                    ok: error.is_none(),
                    exit_code: code,
                    attempts,
                    wall_time_s: (t0.elapsed().as_secs_f64() * 1000.0).round() / 1000.0,
                    log: layout.relative(&log_path).to_path_buf(),
                    error,
                });
            });
        }
    });
    drop(tx);

    let mut runs: Vec<RunResult> = rx.into_iter().collect();
    runs.sort_by_key(|r| r.run);
    let ok_count = runs.iter().filter(|r| r.ok).count();
    let result = ExecResult {
        exp: cf.exp,
        env: adapter.id.clone(),
        job_id: adapter.job_id.clone(),
        parallelism: slots.len(),
        started,
        ok_count,
        fail_count: runs.len() - ok_count,
        runs,
    };
    fsutil::write_yaml(&layout.exec_path(cf.exp), &result)?;
    Ok(result)
}

/// Runs every experiment of `opts.range`. A failing run never stops the
/// batch; callers inspect `fail_count`.
pub fn run_batch(
    layout: &BatchLayout,
    manifest: &Manifest,
    platform: &PlatformPlugin,
    adapter: &ExecEnvAdapter,
    opts: &ExecOptions,
) -> Result<Vec<ExecResult>> {
    let files = command_files(layout, manifest, platform, opts.range)?;
    let mut results = Vec::with_capacity(files.len());
    for cf in &files {
        let path = layout.commands_path(cf.exp);
        if fs::read_to_string(&path).ok().as_deref() != Some(cf.render().as_str()) {
            cf.write(layout)?;
        }
        let r = run_experiment(layout, adapter, opts, cf)?;
        if r.fail_count > 0 {
            log::warn!("exp{}: {} of {} runs failed", r.exp, r.fail_count, r.runs.len());
        } else {
            log::info!("exp{}: {} runs ok", r.exp, r.ok_count);
        }
        results.push(r);
    }
    Ok(results)
}
