#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::SystemTime;

use sha2::{Digest, Sha256};
use xbatch_core::BatchLayout;

pub const HOST_VARS: &[&str] = &[
    "SLURM_JOB_NODELIST",
    "SLURM_JOB_ID",
    "SLURM_CPUS_PER_TASK",
    "PBS_NODEFILE",
    "PBS_JOBID",
    "PBS_NUM_PPN",
    "XBATCH_PLUGIN_PATH",
];

pub fn template() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/refsim-template.xml")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// `xbatch` in `cwd` with a scrubbed cluster environment.
pub fn xbatch(cwd: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_xbatch"));
    cmd.current_dir(cwd).env("RUST_LOG", "warn");
    for v in HOST_VARS {
        cmd.env_remove(v);
    }
    cmd
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn xbatch")
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = run(cmd);
    if !out.status.success() {
        panic!(
            "{:?} exited with {}\nstdout:\n{}\nstderr:\n{}",
            cmd,
            out.status,
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    out
}

/// Standard batch flags for the reference simulator.
pub fn batch_args<'a>(cmd: &'a mut Command, tokens: &[&str], n_runs: usize, secs: u32) -> &'a mut Command {
    batch_args_from(cmd, &template(), tokens, n_runs, secs)
}

pub fn batch_args_from<'a>(
    cmd: &'a mut Command,
    template: &Path,
    tokens: &[&str],
    n_runs: usize,
    secs: u32,
) -> &'a mut Command {
    cmd.arg("--template-input-file")
        .arg(template)
        .arg("--batch-criteria")
        .args(tokens)
        .arg("--n-runs")
        .arg(n_runs.to_string())
        .arg("--exp-setup")
        .arg(format!("exp_setup.T{secs}"))
        .arg("--sierra-root")
        .arg("root")
}

pub fn layout(cwd: &Path, project: &str, tokens: &[&str]) -> BatchLayout {
    layout_for(cwd, project, None, None, tokens)
}

pub fn layout_for(
    cwd: &Path,
    project: &str,
    controller: Option<&str>,
    scenario: Option<&str>,
    tokens: &[&str],
) -> BatchLayout {
    let tokens: Vec<String> = tokens.iter().map(|s| s.to_string()).collect();
    BatchLayout::for_batch(&cwd.join("root"), project, controller, scenario, &tokens)
}

/// Every regular file below `root`, keyed by relative path.
pub fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(rd) = fs::read_dir(&dir) else { continue };
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Modification time and digest of every file below `root`.
pub fn stamps(root: &Path) -> BTreeMap<PathBuf, (SystemTime, String)> {
    files(root)
        .into_iter()
        .map(|rel| {
            let p = root.join(&rel);
            let mtime = fs::metadata(&p).and_then(|m| m.modified()).unwrap();
            (rel, (mtime, sha256(&fs::read(&p).unwrap())))
        })
        .collect()
}

/// Paths whose stamp differs, plus added or removed paths.
pub fn changed(
    before: &BTreeMap<PathBuf, (SystemTime, String)>,
    after: &BTreeMap<PathBuf, (SystemTime, String)>,
) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = before
        .iter()
        .filter(|(k, v)| after.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    out.extend(after.keys().filter(|k| !before.contains_key(*k)).cloned());
    out.sort();
    out
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| if c.is_empty() { f64::NAN } else { c.parse().unwrap() })
                .collect()
        })
        .collect();
    (header, rows)
}

pub fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}
