//! Execution environment adapters: node discovery, slots per node and the
//! wrapper that carries a command line to its node.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, IoContext, Result};

use super::{ENV_ADHOC, ENV_LOCAL, ENV_PBS, ENV_SLURM};

pub const DEFAULT_SLURM_SHELL: &str = "srun --nodes=1 --ntasks=1 --nodelist={host} sh -c {cmd}";
pub const DEFAULT_REMOTE_SHELL: &str = "ssh {host} {cmd}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub host: String,
    pub slots: usize,
}

/// One unit of parallelism on a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub host: String,
    pub index: usize,
}

/// Inputs to adapter construction. `vars` stands in for the process
/// environment so adapters can be built from mocked scheduler variables.
#[derive(Debug, Clone, Default)]
pub struct EnvOptions {
    pub jobs_per_node: Option<usize>,
    pub nodefile: Option<PathBuf>,
    pub remote_shell: Option<String>,
    pub vars: BTreeMap<String, String>,
}

impl EnvOptions {
    pub fn with_process_env(mut self) -> Self {
        self.vars = std::env::vars().collect();
        self
    }

    fn var(&self, name: &str) -> Result<&str> {
        self.vars
            .get(name)
            .map(String::as_str)
            .filter(|v| !v.trim().is_empty())
            .ok_or_else(|| Error::Config(format!("environment variable {name} is not set")))
    }

    fn count_var(&self, name: &str) -> Result<usize> {
        let raw = self.var(name)?;
        match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{name}='{raw}' is not a positive integer"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecEnvAdapter {
    pub id: String,
    pub nodes: Vec<Node>,
    /// `{host}`/`{cmd}` template; `None` runs lines as local children.
    pub remote_shell: Option<String>,
    /// Scheduler job id, when known.
    pub job_id: Option<String>,
}

fn local_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn check_template(t: &str) -> Result<()> {
    for p in ["{host}", "{cmd}"] {
        if !t.contains(p) {
            return Err(Error::Config(format!(
                "remote shell template '{t}' lacks the {p} placeholder"
            )));
        }
    }
    Ok(())
}

fn is_local_host(h: &str) -> bool {
    matches!(h, "localhost" | "127.0.0.1")
}

impl ExecEnvAdapter {
    pub fn local(parallelism: Option<usize>) -> Self {
        ExecEnvAdapter {
            id: ENV_LOCAL.into(),
            nodes: vec![Node {
                host: "localhost".into(),
                slots: parallelism.unwrap_or_else(local_cores).max(1),
            }],
            remote_shell: None,
            job_id: None,
        }
    }

    pub fn slurm(opts: &EnvOptions) -> Result<Self> {
        let nodelist = opts.var("SLURM_JOB_NODELIST")?;
        let job_id = opts.var("SLURM_JOB_ID")?.to_string();
        let slots = match opts.jobs_per_node {
            Some(n) => n,
            None => opts.count_var("SLURM_CPUS_PER_TASK")?,
        };
        let hosts = expand_hostlist(nodelist)?;
        let template = opts
            .remote_shell
            .clone()
            .unwrap_or_else(|| DEFAULT_SLURM_SHELL.into());
        check_template(&template)?;
        Ok(ExecEnvAdapter {
            id: ENV_SLURM.into(),
            nodes: hosts.into_iter().map(|host| Node { host, slots }).collect(),
            remote_shell: Some(template),
            job_id: Some(job_id),
        })
    }

    /// PBS nodefiles repeat a host once per allocated core.
    pub fn pbs(opts: &EnvOptions) -> Result<Self> {
        let path = PathBuf::from(opts.var("PBS_NODEFILE")?);
        let text = fs::read_to_string(&path).at(&path)?;
        let mut nodes: Vec<Node> = Vec::new();
        for host in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            match nodes.iter_mut().find(|n| n.host == host) {
                Some(n) => n.slots += 1,
                None => nodes.push(Node {
                    host: host.to_string(),
                    slots: 1,
                }),
            }
        }
        if nodes.is_empty() {
            return Err(Error::Config(format!("PBS nodefile {} is empty", path.display())));
        }
        let ppn = match opts.jobs_per_node {
            Some(n) => Some(n),
            None if opts.vars.contains_key("PBS_NUM_PPN") => Some(opts.count_var("PBS_NUM_PPN")?),
            None => None,
        };
        if let Some(ppn) = ppn {
            nodes.iter_mut().for_each(|n| n.slots = ppn);
        }
        let template = opts
            .remote_shell
            .clone()
            .unwrap_or_else(|| DEFAULT_REMOTE_SHELL.into());
        check_template(&template)?;
        Ok(ExecEnvAdapter {
            id: ENV_PBS.into(),
            nodes,
            remote_shell: Some(template),
            job_id: opts.vars.get("PBS_JOBID").cloned(),
        })
    }

    /// Nodefile lines are `host[:slots]`; blank lines and `#` comments are
    /// skipped. A nodefile naming only localhost runs locally.
    pub fn adhoc(opts: &EnvOptions) -> Result<Self> {
        let path = opts
            .nodefile
            .as_ref()
            .ok_or_else(|| Error::Config("hpc.adhoc needs --nodefile".into()))?;
        let nodes = parse_nodefile(path, opts.jobs_per_node.unwrap_or(1))?;
        let all_local = nodes.iter().all(|n| is_local_host(&n.host));
        let remote_shell = if all_local {
            None
        } else {
            let t = opts
                .remote_shell
                .clone()
                .unwrap_or_else(|| DEFAULT_REMOTE_SHELL.into());
            check_template(&t)?;
            Some(t)
        };
        Ok(ExecEnvAdapter {
            id: ENV_ADHOC.into(),
            nodes,
            remote_shell,
            job_id: None,
        })
    }

    pub fn from_id(id: &str, opts: &EnvOptions) -> Result<Self> {
        match id {
            ENV_LOCAL => Ok(Self::local(opts.jobs_per_node)),
            ENV_SLURM => Self::slurm(opts),
            ENV_PBS => Self::pbs(opts),
            ENV_ADHOC => Self::adhoc(opts),
            "hpc.ros1" | "robot.turtlebot3" => Err(Error::Config(format!(
                "execution environment '{id}' is an interface stub without a transport"
            ))),
            other => Err(Error::Config(format!(
                "unknown execution environment '{other}' (known: {ENV_LOCAL}, {ENV_SLURM}, {ENV_PBS}, {ENV_ADHOC})"
            ))),
        }
    }

    pub fn total_slots(&self) -> usize {
        self.nodes.iter().map(|n| n.slots).sum()
    }

    /// Slots usable for an experiment of `n_runs` runs, spread over the
    /// nodes round-robin so small experiments still use every node.
    pub fn slots(&self, n_runs: usize) -> Vec<Slot> {
        let max_slots = self.nodes.iter().map(|n| n.slots).max().unwrap_or(0);
        let mut out = Vec::new();
        for index in 0..max_slots {
            for n in &self.nodes {
                if index < n.slots {
                    out.push(Slot {
                        host: n.host.clone(),
                        index,
                    });
                }
            }
        }
        out.truncate(n_runs.max(1));
        out
    }

    /// Prefix-free local lines run as is; remote lines change into the
    /// batch root on the target node first.
    pub fn wrap(&self, host: &str, root: &Path, core: &str) -> String {
        match &self.remote_shell {
            None => core.to_string(),
            Some(t) => {
                let root = root.to_string_lossy();
                let cmd = format!("cd {} && {core}", shell_words::quote(&root));
                t.replace("{host}", host)
                    .replace("{cmd}", &shell_words::quote(&cmd))
            }
        }
    }
}

fn parse_nodefile(path: &Path, default_slots: usize) -> Result<Vec<Node>> {
    let text = fs::read_to_string(path).at(path)?;
    let mut nodes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (host, slots) = match line.split_once(':') {
            Some((h, s)) => {
                let slots = s.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                    Error::Config(format!(
                        "{}:{}: bad slot count '{s}'",
                        path.display(),
                        i + 1
                    ))
                })?;
                (h.trim(), slots)
            }
            None => (line, default_slots),
        };
        nodes.push(Node {
            host: host.to_string(),
            slots,
        });
    }
    if nodes.is_empty() {
        return Err(Error::Config(format!("nodefile {} lists no hosts", path.display())));
    }
    Ok(nodes)
}

/// Expands a SLURM hostlist such as `n[01-03,7],gpu1`.
pub fn expand_hostlist(list: &str) -> Result<Vec<String>> {
    let bad = |m: &str| Error::Config(format!("bad hostlist '{list}': {m}"));
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in list.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(bad("unbalanced ']'"));
                }
            }
            ',' if depth == 0 => {
                items.push(&list[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(bad("unbalanced '['"));
    }
    items.push(&list[start..]);

    let mut hosts = Vec::new();
    for item in items.into_iter().map(str::trim).filter(|s| !s.is_empty()) {
        expand_item(item, &mut hosts).map_err(|m| bad(&m))?;
    }
    if hosts.is_empty() {
        return Err(bad("no hosts"));
    }
    Ok(hosts)
}

fn expand_item(item: &str, out: &mut Vec<String>) -> std::result::Result<(), String> {
    let Some(open) = item.find('[') else {
        out.push(item.to_string());
        return Ok(());
    };
    let close = open + item[open..].find(']').ok_or("missing ']'")?;
    let (prefix, body, rest) = (&item[..open], &item[open + 1..close], &item[close + 1..]);
    let mut tails = Vec::new();
    expand_item(rest, &mut tails)?;
    for part in body.split(',') {
        let (lo, hi) = part.split_once('-').unwrap_or((part, part));
        let width = lo.len();
        let lo_n: u64 = lo.parse().map_err(|_| format!("bad range '{part}'"))?;
        let hi_n: u64 = hi.parse().map_err(|_| format!("bad range '{part}'"))?;
        if lo_n > hi_n {
            return Err(format!("descending range '{part}'"));
        }
        for n in lo_n..=hi_n {
            for tail in &tails {
                out.push(format!("{prefix}{n:0width$}{tail}"));
            }
        }
    }
    Ok(())
}
