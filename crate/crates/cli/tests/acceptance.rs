//! Acceptance suite. Each criterion runs against the real binaries under a
//! wall-clock limit and prints one PASS/FAIL line.
//!
//! Pass criterion numbers as arguments to run a subset.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use xbatch_core::deliverables::REFSIM_GRAPHS;
use xbatch_core::results::{intra_exp_stats, DataTable, RunStack, Stat};

use common::oracle::{self, close};
use common::*;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Duration,
    check: fn() -> Check,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "expansion arithmetic", limit: Duration::from_secs(1), check: expansion },
    Criterion { id: 2, name: "end-to-end reproducibility", limit: Duration::from_secs(60), check: reproducibility },
    Criterion { id: 3, name: "statistics oracle", limit: Duration::from_secs(30), check: stats_oracle },
    Criterion { id: 4, name: "experiment range re-execution", limit: Duration::from_secs(30), check: exp_range },
    Criterion { id: 5, name: "environment decoupling", limit: Duration::from_secs(5), check: env_decoupling },
    Criterion { id: 6, name: "stage subsets", limit: Duration::from_secs(30), check: stage_subsets },
    Criterion { id: 7, name: "batch comparison", limit: Duration::from_secs(10), check: comparison },
    Criterion { id: 8, name: "heatmap pipeline", limit: Duration::from_secs(60), check: heatmap },
];

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let wanted: BTreeSet<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&c.id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                Err(msg)
            });
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; over time limit")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {} {}: {} [{:.2}s of {}s]",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {} failed", ran - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn tmp() -> TempDir {
    tempfile::tempdir().unwrap()
}

/// Numeric attribute `name` from every `exp<i>/run<j>/input.xml`, keyed by (exp, run).
fn input_attr(root: &Path, name: &str) -> BTreeMap<(usize, usize), f64> {
    let needle = format!(" {name}=\"");
    let mut out = BTreeMap::new();
    for rel in files(&root.join("exp-inputs")) {
        if rel.file_name().is_none_or(|f| f != "input.xml") {
            continue;
        }
        let parts: Vec<String> = rel.iter().map(|p| p.to_string_lossy().into_owned()).collect();
        let exp = parts[0].strip_prefix("exp").unwrap().parse().unwrap();
        let run = parts[1].strip_prefix("run").unwrap().parse().unwrap();
        let text = fs::read_to_string(root.join("exp-inputs").join(&rel)).unwrap();
        let at = text.find(&needle).unwrap_or_else(|| panic!("{} has no {name}", rel.display())) + needle.len();
        let end = at + text[at..].find('"').unwrap();
        out.insert((exp, run), text[at..end].parse().unwrap());
    }
    out
}

fn per_exp(values: &BTreeMap<(usize, usize), f64>) -> Vec<f64> {
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(exp, _), &v) in values {
        let prev = out.insert(exp, v);
        assert!(prev.is_none_or(|p| p == v), "exp{exp}: runs disagree");
    }
    out.into_values().collect()
}

fn run_dirs(root: &Path) -> usize {
    let mut n = 0;
    for exp in fs::read_dir(root.join("exp-inputs")).unwrap().flatten() {
        for run in fs::read_dir(exp.path()).unwrap().flatten() {
            if run.path().is_dir() && run.file_name().to_string_lossy().starts_with("run") {
                n += 1;
            }
        }
    }
    n
}

fn expansion() -> Check {
    let t = tmp();
    let cwd = t.path();

    let vel = ["vel.min=1p0.max=10p0.C10"];
    run_ok(batch_args(xbatch(cwd).args(["--pipeline", "1"]), &vel, 2, 5));
    let got = per_exp(&input_attr(&layout(cwd, "default", &vel).root, "velocity"));
    let want: Vec<f64> = (1..=10).map(f64::from).collect();
    ensure!(got == want, "vel C10 expanded to {got:?}");

    let pop = ["population_size.Log128"];
    run_ok(batch_args(xbatch(cwd).args(["--pipeline", "1"]), &pop, 2, 5));
    let got = per_exp(&input_attr(&layout(cwd, "default", &pop).root, "count"));
    let want: Vec<f64> = (0..8).map(|p| f64::from(1u32 << p)).collect();
    ensure!(got == want, "Log128 expanded to {got:?}");

    let bi = ["population_size.Log8", "vel.min=1p0.max=10p0.C10"];
    let n_runs = 3;
    run_ok(batch_args(xbatch(cwd).args(["--pipeline", "1"]), &bi, n_runs, 5));
    let root = layout(cwd, "default", &bi).root;
    let counts = input_attr(&root, "count");
    let vels = input_attr(&root, "velocity");
    let pairs: BTreeSet<(u64, u64)> = counts
        .iter()
        .map(|(k, &c)| (c as u64, vels[k] as u64))
        .collect();
    let product: BTreeSet<(u64, u64)> = [1u64, 2, 4, 8]
        .iter()
        .flat_map(|&c| (1..=10).map(move |v| (c, v)))
        .collect();
    ensure!(pairs == product, "bivariate grid is not the per-axis product");
    let dirs = run_dirs(&root);
    ensure!(dirs == 4 * 10 * n_runs, "{dirs} run dirs, expected {}", 4 * 10 * n_runs);
    Ok(format!("C10 = 1..10, Log128 = 1..128, 4x10 grid x {n_runs} runs = {dirs} run dirs"))
}

/// Digest of every file with timestamps and provenance removed.
fn normalized_digests(root: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    for rel in files(root) {
        let name = rel.file_name().unwrap().to_string_lossy().into_owned();
        if name == "events.jsonl" || name == "exec.yaml" {
            continue;
        }
        let bytes = fs::read(root.join(&rel)).unwrap();
        let bytes = if rel == Path::new("manifest.yaml") {
            String::from_utf8(bytes)
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with("created:"))
                .collect::<Vec<_>>()
                .join("\n")
                .into_bytes()
        } else if name.ends_with(".json") {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("provenance");
            serde_json::to_vec(&v).unwrap()
        } else {
            bytes
        };
        out.insert(rel, sha256(&bytes));
    }
    out
}

fn reproducibility() -> Check {
    let t = tmp();
    let tokens = ["population_size.Log8"];
    let mut roots = Vec::new();
    for side in ["a", "b"] {
        let cwd = t.path().join(side);
        fs::create_dir_all(&cwd).unwrap();
        run_ok(batch_args(
            xbatch(&cwd).args(["--pipeline", "1", "2", "3", "4", "--master-seed", "20240607"]),
            &tokens,
            5,
            200,
        ));
        roots.push(layout(&cwd, "default", &tokens).root);
    }
    let a = normalized_digests(&roots[0]);
    let b = normalized_digests(&roots[1]);
    let a_keys: Vec<_> = a.keys().collect();
    let b_keys: Vec<_> = b.keys().collect();
    ensure!(a_keys == b_keys, "file sets differ");
    let differing: Vec<_> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    ensure!(differing.is_empty(), "differing files: {differing:?}");
    let count = |prefix: &str| a.keys().filter(|k| k.starts_with(prefix)).count();
    let (outs, stats, graphs) = (count("exp-outputs"), count("statistics"), count("graphs"));
    ensure!(outs > 0 && stats > 0 && graphs > 0, "missing stage outputs");
    Ok(format!(
        "{} files identical ({outs} run outputs, {stats} statistics, {graphs} graph files)",
        a.len()
    ))
}

fn random_value(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..20) {
        0 => f64::NAN,
        1..=5 => f64::from(rng.random_range(-3i32..=3)),
        6..=8 => rng.random_range(0.0..1.0),
        _ => rng.random_range(-1000.0..1000.0),
    }
}

fn stats_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_57a7);
    let mut cells = 0usize;
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(1..=16);
        let rows = rng.random_range(1..=8);
        let cols = rng.random_range(1..=8);
        let columns: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
        let tables: Vec<DataTable> = (0..n)
            .map(|_| {
                let data = (0..rows)
                    .map(|_| (0..cols).map(|_| random_value(&mut rng)).collect())
                    .collect();
                DataTable::new("s", columns.clone(), data)
            })
            .collect();
        let stack = RunStack::new(0, "s", (0..n).collect(), tables.clone()).map_err(|e| e.to_string())?;
        let bundle = intra_exp_stats(&stack);
        for r in 0..rows {
            for c in 0..cols {
                let sample: Vec<f64> = tables.iter().map(|t| t.rows[r][c]).collect();
                let o = oracle::summarize(&sample);
                let want = [
                    (Stat::Mean, o.mean),
                    (Stat::Stddev, o.stddev),
                    (Stat::CiL95, o.lo),
                    (Stat::CiH95, o.hi),
                    (Stat::Min, o.min),
                    (Stat::Q1, o.q1),
                    (Stat::Median, o.median),
                    (Stat::Q3, o.q3),
                    (Stat::Max, o.max),
                ];
                for (stat, w) in want {
                    let got = bundle.get(stat)[r][c];
                    ensure!(
                        close(got, w, 1e-9),
                        "case {case} cell ({r},{c}) {}: got {got}, oracle {w}, sample {sample:?}",
                        stat.id()
                    );
                    if !w.is_nan() {
                        worst = worst.max((got - w).abs());
                    }
                }
                cells += 1;
            }
        }
    }
    Ok(format!("1000 stacks, {cells} cells, max abs error {worst:.1e}"))
}

fn exp_range() -> Check {
    let t = tmp();
    let cwd = t.path();
    let tokens = ["population_size.Linear13"];
    run_ok(batch_args(xbatch(cwd).args(["--pipeline", "1", "2"]), &tokens, 2, 5));
    let root = layout(cwd, "default", &tokens).root;
    let outputs = root.join("exp-outputs");
    let before = stamps(&outputs);
    let inputs_before = stamps(&root.join("exp-inputs"));
    std::thread::sleep(Duration::from_millis(20));
    run_ok(batch_args(xbatch(cwd).args(["--pipeline", "2", "--exp-range=10:12"]), &tokens, 2, 5));
    let after = stamps(&outputs);
    ensure!(inputs_before == stamps(&root.join("exp-inputs")), "exp-inputs changed");
    let changed = changed(&before, &after);
    let exec_changed: Vec<String> = changed
        .iter()
        .filter(|p| p.file_name().is_some_and(|f| f == "exec.yaml"))
        .map(|p| p.parent().unwrap().display().to_string())
        .collect();
    ensure!(
        exec_changed == ["exp10", "exp11", "exp12"],
        "exec.yaml changed for {exec_changed:?}"
    );
    let outside: Vec<_> = changed
        .iter()
        .filter(|p| !["exp10", "exp11", "exp12"].iter().any(|e| p.starts_with(e)))
        .collect();
    ensure!(outside.is_empty(), "files outside the range changed: {outside:?}");
    let logs = changed.iter().filter(|p| p.ends_with("run.log")).count();
    ensure!(logs == 6, "{logs} run logs rewritten, expected 6");
    Ok(format!("13 experiments, re-executed {exec_changed:?}, {} files changed", changed.len()))
}

/// (exp, run) -> (host, command) from dry-run output.
fn parse_plan(stdout: &[u8]) -> BTreeMap<(usize, usize), (String, String)> {
    let text = String::from_utf8_lossy(stdout);
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let (head, command) = line.split_once(" :: ").unwrap_or_else(|| panic!("bad plan line {line:?}"));
        let f: Vec<&str> = head.split_whitespace().collect();
        let exp = f[0].strip_prefix("exp").unwrap().parse().unwrap();
        let run = f[1].strip_prefix("run").unwrap().parse().unwrap();
        out.insert((exp, run), (f[2].to_string(), command.to_string()));
    }
    out
}

/// The command core inside a launch wrapper.
fn unwrap_core(command: &str, root: &Path) -> Result<String, String> {
    let words = shell_words::split(command).map_err(|e| e.to_string())?;
    let inner = words.last().ok_or("empty command")?;
    let prefix = format!("cd {} && ", root.display());
    inner
        .strip_prefix(&prefix)
        .map(str::to_string)
        .ok_or_else(|| format!("wrapped command does not enter the batch root: {inner}"))
}

fn env_decoupling() -> Check {
    let t = tmp();
    let cwd = t.path();
    let tokens = ["population_size.Log8"];
    run_ok(batch_args(xbatch(cwd).args(["--pipeline", "1"]), &tokens, 4, 5));
    let root = std::path::absolute(layout(cwd, "default", &tokens).root).unwrap();

    let dry = |env: &str| {
        let mut cmd = xbatch(cwd);
        batch_args(&mut cmd, &tokens, 4, 5).args(["--pipeline", "2", "--exec-dry-run", "--exec-env", env]);
        cmd
    };
    let local = parse_plan(&run_ok(&mut dry("hpc.local")).stdout);
    let mut slurm_cmd = dry("hpc.slurm");
    slurm_cmd
        .env("SLURM_JOB_NODELIST", "n[01-02]")
        .env("SLURM_JOB_ID", "4242")
        .env("SLURM_CPUS_PER_TASK", "2");
    let slurm = parse_plan(&run_ok(&mut slurm_cmd).stdout);
    let mut pbs_cmd = dry("hpc.pbs");
    pbs_cmd.env("PBS_NODEFILE", fixture("pbs_nodefile")).env("PBS_JOBID", "99.head");
    let pbs = parse_plan(&run_ok(&mut pbs_cmd).stdout);
    let mut adhoc_cmd = dry("hpc.adhoc");
    adhoc_cmd.arg("--nodefile").arg(fixture("adhoc_nodefile"));
    let adhoc = parse_plan(&run_ok(&mut adhoc_cmd).stdout);

    ensure!(local.len() == 16, "local plan has {} lines, expected 16", local.len());
    let cores: BTreeMap<_, _> = local.iter().map(|(k, (_, c))| (*k, c.clone())).collect();
    for (name, plan, wrapper) in [("hpc.slurm", &slurm, "srun "), ("hpc.pbs", &pbs, "ssh "), ("hpc.adhoc", &adhoc, "ssh ")] {
        ensure!(plan.len() == cores.len(), "{name}: {} lines", plan.len());
        let mut hosts = BTreeSet::new();
        for (k, (host, command)) in plan {
            ensure!(command.starts_with(wrapper), "{name}: unexpected wrapper in {command}");
            let core = unwrap_core(command, &root)?;
            ensure!(core == cores[k], "{name} exp{} run{}: core {core:?} != local {:?}", k.0, k.1, cores[k]);
            hosts.insert(host.clone());
        }
        ensure!(
            hosts == BTreeSet::from(["n01".to_string(), "n02".to_string()]),
            "{name}: hosts {hosts:?}"
        );
    }

    for (env, file, golden) in [
        ("hpc.slurm", "job.sh", "submit.slurm"),
        ("hpc.pbs", "job.pbs", "submit.pbs"),
    ] {
        let time = if env == "hpc.slurm" { "90m" } else { "1:30:00" };
        run_ok(xbatch(cwd).args([
            "--exec-env",
            env,
            "--exec-jobs-per-node",
            "4",
            "--submit-nodes",
            "2",
            "--submit-time",
            time,
            "--emit-submit-script",
            file,
            "--template-input-file",
            "refsim.xml",
            "--batch-criteria",
            "population_size.Log8",
            "--n-runs",
            "5",
            "--exp-setup",
            "exp_setup.T200",
        ]));
        let got = fs::read(cwd.join(file)).unwrap();
        let want = fs::read(fixture(golden)).unwrap();
        ensure!(got == want, "{env} submit script differs from {golden}:\n{}", String::from_utf8_lossy(&got));
    }
    Ok("16 identical command cores on local/slurm/pbs/adhoc; slurm and pbs scripts match goldens".into())
}

fn stage_subsets() -> Check {
    let t = tmp();
    let cwd = t.path();
    let cfg = cwd.join("demo/config");
    fs::create_dir_all(&cfg).unwrap();
    fs::write(cfg.join("graphs.yaml"), REFSIM_GRAPHS).unwrap();
    let tokens = ["population_size.Log4"];
    let full = |stages: &[&str]| {
        let mut cmd = xbatch(cwd);
        batch_args(&mut cmd, &tokens, 3, 20).args(["--project", "demo", "--pipeline"]).args(stages);
        run_ok(&mut cmd);
    };
    full(&["1", "2", "3", "4"]);
    let root = layout(cwd, "demo", &tokens).root;
    let inputs = stamps(&root.join("exp-inputs"));
    let outputs = stamps(&root.join("exp-outputs"));
    let digests = |dir: &str| -> BTreeMap<PathBuf, String> {
        stamps(&root.join(dir)).into_iter().map(|(k, (_, d))| (k, d)).collect()
    };
    let stats = digests("statistics");
    let graphs = digests("graphs");
    fs::remove_dir_all(root.join("statistics")).unwrap();
    fs::remove_dir_all(root.join("graphs")).unwrap();
    std::thread::sleep(Duration::from_millis(20));

    full(&["3", "4"]);
    ensure!(stamps(&root.join("exp-inputs")) == inputs, "exp-inputs touched by stages 3-4");
    ensure!(stamps(&root.join("exp-outputs")) == outputs, "exp-outputs touched by stages 3-4");
    ensure!(digests("statistics") == stats, "regenerated statistics differ");
    ensure!(digests("graphs") == graphs, "regenerated graphs differ");

    let yaml = fs::read_to_string(cfg.join("graphs.yaml")).unwrap();
    let old = "  - id: collected-summary\n    kind: linegraph\n    scope: inter_exp\n    stem: collected\n    columns: [collected]\n    title: Objects collected by the end of the run\n    y_label: Objects collected\n";
    ensure!(yaml.contains(old), "collected-summary target not found in graph config");
    fs::write(cfg.join("graphs.yaml"), yaml.replace(old, &old.replace("y_label: Objects collected", "y_label: Objects delivered"))).unwrap();
    let before = stamps(&root.join("graphs"));
    let stats_before = stamps(&root.join("statistics"));
    std::thread::sleep(Duration::from_millis(20));
    full(&["4"]);
    let changed = changed(&before, &stamps(&root.join("graphs")));
    let want = [PathBuf::from("collated/collected-summary.json"), PathBuf::from("collated/collected-summary.svg")];
    ensure!(changed == want, "label change touched {changed:?}");
    ensure!(stamps(&root.join("statistics")) == stats_before, "stage 4 touched statistics");
    let doc = read_json(&root.join("graphs/collated/collected-summary.json"));
    ensure!(doc["y_axis"]["label"] == "Objects delivered", "new label not applied");
    Ok(format!(
        "stages 3 4 rebuilt {} statistics and {} graph files byte-identical; label edit changed {} files",
        stats.len(),
        graphs.len(),
        changed.len()
    ))
}

fn series_labels(doc: &serde_json::Value) -> Vec<(String, bool)> {
    doc["series"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (s["label"].as_str().unwrap().to_string(), !s["model"].is_null()))
        .collect()
}

fn comparison() -> Check {
    let t = tmp();
    let cwd = t.path();
    let cfg = cwd.join("cmp/config");
    fs::create_dir_all(&cfg).unwrap();
    let ctl = |name: &str, v: &str| {
        format!("{name}:\n  all:\n    - {{op: set_attr, path: /refsim/agents, name: velocity, value: '{v}'}}\n")
    };
    fs::write(
        cfg.join("controllers.yaml"),
        [ctl("ctl.slow", "0.5"), ctl("ctl.mid", "1.0"), ctl("ctl.fast", "1.5")].concat(),
    )
    .unwrap();
    let tokens = ["population_size.Log4"];
    let batch = |controller: &str, scenario: Option<(&str, &Path)>| -> PathBuf {
        let mut cmd = xbatch(cwd);
        let tmpl = scenario.map_or_else(template, |s| s.1.to_path_buf());
        batch_args_from(&mut cmd, &tmpl, &tokens, 3, 20)
            .args(["--project", "cmp", "--controller", controller, "--master-seed", "11"]);
        if let Some((s, _)) = scenario {
            cmd.args(["--scenario", s]);
        }
        run_ok(&mut cmd);
        layout_for(cwd, "cmp", Some(controller), scenario.map(|s| s.0), &tokens).root
    };

    let controllers = ["ctl.slow", "ctl.mid", "ctl.fast"];
    let roots: Vec<PathBuf> = controllers.iter().map(|c| batch(c, None)).collect();
    let join = |r: &[PathBuf]| r.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
    run_ok(xbatch(cwd).args([
        "--compare",
        &join(&roots),
        "--compare-mode",
        "intra",
        "--compare-target",
        "collected-summary",
        "--compare-output-root",
        "intra-out",
    ]));
    let doc = read_json(&cwd.join("intra-out/collected-summary.json"));
    let labels = series_labels(&doc);
    let want: Vec<(String, bool)> = controllers.iter().map(|c| (c.to_string(), false)).collect();
    ensure!(labels == want, "intra series {labels:?}");

    let template = fs::read_to_string(template()).unwrap();
    ensure!(template.contains("side=\"16\""), "template arena side changed");
    let scenarios = [("arena12", "12"), ("arena20", "20")];
    let mut inter_roots = Vec::new();
    for (name, side) in scenarios {
        let path = cwd.join(format!("{name}.xml"));
        fs::write(&path, template.replace("side=\"16\"", &format!("side=\"{side}\""))).unwrap();
        inter_roots.push(batch("ctl.mid", Some((name, &path))));
    }
    run_ok(xbatch(cwd).args([
        "--compare",
        &join(&inter_roots),
        "--compare-mode",
        "inter",
        "--compare-target",
        "collected-summary",
        "--compare-output-root",
        "inter-out",
        "--compare-models",
        "model.constant:100",
    ]));
    let doc = read_json(&cwd.join("inter-out/collected-summary.json"));
    let labels = series_labels(&doc);
    ensure!(labels.len() == scenarios.len() + 1, "inter doc has {} series", labels.len());
    let empirical: Vec<&str> = labels.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    ensure!(empirical == ["arena12", "arena20"], "inter empirical series {empirical:?}");
    ensure!(labels.iter().filter(|l| l.1).count() == 1, "expected one model series");
    Ok(format!(
        "intra: {} series {:?}; inter: {} scenarios + 1 model = {} series",
        want.len(),
        controllers,
        scenarios.len(),
        labels.len()
    ))
}

fn heatmap() -> Check {
    let t = tmp();
    let cwd = t.path();
    let tokens = ["population_size.Linear4", "saa_noise.C5"];
    let n_runs = 3;
    run_ok(batch_args(xbatch(cwd).args(["--pipeline", "1", "2", "3", "4"]), &tokens, n_runs, 10));
    let root = layout(cwd, "default", &tokens).root;

    let doc = read_json(&root.join("graphs/collated/collected-heatmap.json"));
    ensure!(doc["kind"] == "heatmap", "collected-heatmap is {}", doc["kind"]);
    ensure!(doc["y_axis"]["label"] == tokens[0], "row axis label {}", doc["y_axis"]["label"]);
    ensure!(doc["x_axis"]["label"] == tokens[1], "column axis label {}", doc["x_axis"]["label"]);
    let panels = doc["panels"].as_array().unwrap();
    ensure!(panels.len() == 1, "{} panels", panels.len());
    let p = &panels[0];
    ensure!(p["rows"] == 4 && p["cols"] == 5, "panel is {}x{}", p["rows"], p["cols"]);
    let cells: Vec<Vec<f64>> = serde_json::from_value(p["cells"].clone()).unwrap();
    ensure!(cells.len() == 4 && cells.iter().all(|r| r.len() == 5), "cell matrix is not 4x5");

    let out_dir = |exp: usize, run: usize| root.join(format!("exp-outputs/exp{exp}/run{run}/output"));
    let mut frames_checked = 0;
    for exp in 0..20 {
        let finals: Vec<f64> = (0..n_runs)
            .map(|run| *read_csv(&out_dir(exp, run).join("collected.csv")).1.last().unwrap().last().unwrap())
            .collect();
        let want = oracle::summarize(&finals).mean;
        let got = cells[exp / 5][exp % 5];
        ensure!(close(got, want, 1e-9), "exp{exp} summary cell {got}, oracle {want}");

        let mut last = None;
        for k in 0.. {
            if !out_dir(exp, 0).join(format!("spatial.{k}.csv")).is_file() {
                break;
            }
            let mats: Vec<Vec<Vec<f64>>> = (0..n_runs)
                .map(|run| read_csv(&out_dir(exp, run).join(format!("spatial.{k}.csv"))).1)
                .collect();
            let want = oracle::mean_of(&mats);
            let got = read_csv(&root.join(format!("statistics/exp{exp}/frames/spatial.{k}.csv"))).1;
            ensure!(got.len() == want.len(), "exp{exp} frame {k} shape");
            for (gr, wr) in got.iter().zip(&want) {
                for (g, w) in gr.iter().zip(wr) {
                    ensure!(close(*g, *w, 1e-9), "exp{exp} frame {k}: {g} vs oracle {w}");
                }
            }
            frames_checked += 1;
            last = Some(want);
        }
        let last = last.ok_or(format!("exp{exp}: no spatial snapshots"))?;
        let occ = read_json(&root.join(format!("graphs/exp{exp}/occupancy.json")));
        let shown: Vec<Vec<f64>> = serde_json::from_value(occ["panels"][0]["cells"].clone()).unwrap();
        ensure!(
            shown.iter().flatten().zip(last.iter().flatten()).all(|(g, w)| close(*g, *w, 1e-9)),
            "exp{exp}: occupancy heatmap does not show the averaged last frame"
        );
    }
    Ok(format!("4x5 heatmap labelled {tokens:?}; {frames_checked} averaged frames match the oracle"))
}
