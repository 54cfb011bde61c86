use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

/// Batch experiment automation: generate, execute, summarize, plot and
/// compare.
#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "xbatch", version, about)]
pub struct Args {
    /// XML template every experimental run input is derived from.
    #[arg(long, value_name = "PATH")]
    pub template_input_file: Option<PathBuf>,

    #[arg(long, default_value = "platform.refsim")]
    pub platform: String,

    /// Project name; looked up on the plugin path, then as ./<name>.
    #[arg(long, default_value = "default")]
    pub project: String,

    /// One or two batch criteria tokens, e.g. population_size.Log128.
    #[arg(long, num_args = 1.., value_name = "TOKEN")]
    pub batch_criteria: Vec<String>,

    #[arg(long)]
    pub controller: Option<String>,

    #[arg(long)]
    pub robot: Option<String>,

    /// Free-form scenario name recorded in the manifest.
    #[arg(long)]
    pub scenario: Option<String>,

    /// exp_setup.T<seconds>[.K<hz>]
    #[arg(long, value_name = "TOKEN")]
    pub exp_setup: Option<String>,

    #[arg(long, value_name = "N")]
    pub n_runs: Option<usize>,

    /// Stages to run, in increasing order (default 1 2 3 4).
    #[arg(long, num_args = 1.., value_name = "STAGE")]
    pub pipeline: Vec<u8>,

    /// Inclusive experiment range L:H for stages 2-4.
    #[arg(long, value_name = "L:H")]
    pub exp_range: Option<String>,

    #[arg(long, default_value = "hpc.local")]
    pub exec_env: String,

    #[arg(long, value_name = "N")]
    pub exec_jobs_per_node: Option<usize>,

    #[arg(long, value_name = "PATH")]
    pub nodefile: Option<PathBuf>,

    /// Print the dispatch plan instead of running anything.
    #[arg(long)]
    pub exec_dry_run: bool,

    /// Remote shell template with {host} and {cmd} placeholders.
    #[arg(long, value_name = "TEMPLATE")]
    pub exec_remote_shell: Option<String>,

    /// Extra attempts for a failed run.
    #[arg(long, default_value_t = 0)]
    pub retry: u32,

    #[arg(long, default_value = "storage.csv")]
    pub storage_medium: String,

    #[arg(long, default_value = "conf95", value_parser = ["conf95", "bw", "all"])]
    pub dist_stats: String,

    #[arg(long, default_value = "final", value_parser = ["final", "mean", "max", "sum"])]
    pub reducer: String,

    /// Configure frame capture and produce video commands.
    #[arg(long)]
    pub platform_vc: bool,

    /// Appended verbatim to the video encoder command.
    #[arg(long, value_name = "OPTS", allow_hyphen_values = true)]
    pub render_cmd_opts: Option<String>,

    /// Run the video encoder command instead of only writing it.
    #[arg(long)]
    pub render_exec: bool,

    /// Comma-separated batch roots to compare (stage 5).
    #[arg(long, value_delimiter = ',', value_name = "ROOTS")]
    pub compare: Vec<PathBuf>,

    #[arg(long, default_value = "intra", value_parser = ["intra", "inter"])]
    pub compare_mode: String,

    #[arg(long, value_name = "GRAPH_ID")]
    pub compare_target: Option<String>,

    #[arg(long, value_parser = ["row", "col"])]
    pub as_lines: Option<String>,

    #[arg(long, value_name = "PATH")]
    pub compare_output_root: Option<PathBuf>,

    /// Id of the comparison document (default: the target id).
    #[arg(long, value_name = "ID")]
    pub compare_output_id: Option<String>,

    /// Model overlays for comparisons, `id[:value]`, comma-separated.
    #[arg(long, value_delimiter = ',', value_name = "MODELS")]
    pub compare_models: Vec<String>,

    /// Add an A-B panel when comparing two heatmaps.
    #[arg(long)]
    pub compare_diff: bool,

    /// Regenerate inputs even if seeds.yaml disagrees with the batch shape.
    #[arg(long)]
    pub force_regen: bool,

    /// Output root; batches live under <root>/<project>/<slug>.
    #[arg(long, default_value = "xbatch-root", value_name = "PATH")]
    pub sierra_root: PathBuf,

    /// Use this batch root instead of deriving it from the criteria.
    #[arg(long, value_name = "PATH")]
    pub batch_root: Option<PathBuf>,

    /// Master seed for per-run seeds (random when omitted).
    #[arg(long, value_name = "N")]
    pub master_seed: Option<u64>,

    /// Write a scheduler submit script for --exec-env and exit.
    #[arg(long, value_name = "PATH")]
    pub emit_submit_script: Option<PathBuf>,

    #[arg(long, default_value_t = 1, value_name = "N")]
    pub submit_nodes: u32,

    #[arg(long, default_value = "1h", value_name = "TIME")]
    pub submit_time: String,

    /// Accepted for compatibility; has no effect.
    #[arg(long, hide = true)]
    pub no_master_node: bool,
}

impl Args {
    /// Flag snapshot for the manifest: every set option as a string.
    pub fn snapshot(&self) -> std::collections::BTreeMap<String, String> {
        let value = serde_json::to_value(self).unwrap_or_default();
        let mut out = std::collections::BTreeMap::new();
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                let s = match v {
                    serde_json::Value::Null => continue,
                    serde_json::Value::Bool(false) => continue,
                    serde_json::Value::Array(a) if a.is_empty() => continue,
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                out.insert(k.replace('_', "-"), s);
            }
        }
        out
    }
}

/// `argv` without the submit-script flags, for the script to re-run.
pub fn submit_invocation(argv: &[String]) -> Vec<String> {
    const DROP: [&str; 3] = ["--emit-submit-script", "--submit-nodes", "--submit-time"];
    let mut out = Vec::new();
    let mut skip_next = false;
    for a in argv {
        if skip_next {
            skip_next = false;
            continue;
        }
        if DROP.contains(&a.as_str()) {
            skip_next = true;
            continue;
        }
        if DROP.iter().any(|d| a.starts_with(&format!("{d}="))) {
            continue;
        }
        out.push(a.clone());
    }
    out
}
