//! Stage 3: per-experiment statistics across runs, batch summaries across
//! experiments and averaged snapshot frames.
//!
//! Reads only `exp-outputs/` and writes only `statistics/`.

mod stats;
mod storage;
mod table;

use std::collections::BTreeMap;
use std::fs;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};
use crate::exec::ExpRange;
use crate::expgen::{BatchLayout, Manifest};
use crate::fsutil;
use crate::platform::PlatformPlugin;

pub use stats::{
    cell_stats, intra_exp_stats, mean_matrix, quantile, CellStats, DistStats, RunStack, Stat,
    StatsBundle, Z95,
};
pub use storage::{Storage, CSV_STORAGE_ID};
pub use table::{format_cell, DataTable, Matrix};

/// How one run's column is reduced to a scalar for batch summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    #[default]
    Final,
    Mean,
    Max,
    Sum,
}

impl Reducer {
    pub fn apply(self, values: impl Iterator<Item = f64>) -> f64 {
        let v: Vec<f64> = values.filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return f64::NAN;
        }
        match self {
            Reducer::Final => v[v.len() - 1],
            Reducer::Mean => v.iter().sum::<f64>() / v.len() as f64,
            Reducer::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Reducer::Sum => v.iter().sum(),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Reducer::Final => "final",
            Reducer::Mean => "mean",
            Reducer::Max => "max",
            Reducer::Sum => "sum",
        }
    }
}

impl FromStr for Reducer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Reducer::Final),
            "mean" => Ok(Reducer::Mean),
            "max" => Ok(Reducer::Max),
            "sum" => Ok(Reducer::Sum),
            other => Err(Error::Usage(format!(
                "--reducer must be final, mean, max or sum, got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRun {
    pub run: usize,
    pub reason: String,
}

/// Readable runs of one stem; unreadable ones are skipped with a reason.
pub fn collate_runs(
    layout: &BatchLayout,
    manifest: &Manifest,
    platform: &PlatformPlugin,
    storage: &Storage,
    exp: usize,
    stem: &str,
) -> Result<(RunStack, Vec<SkippedRun>)> {
    let mut runs = Vec::new();
    let mut tables = Vec::new();
    let mut skipped = Vec::new();
    for run in 0..manifest.n_runs {
        let dir = layout.run_output_dir(exp, run).join(&platform.output_dir);
        let path = storage.table_path(&dir, stem);
        if !path.is_file() {
            log::warn!("exp{exp}/run{run}: no {} output, run excluded", stem);
            skipped.push(SkippedRun {
                run,
                reason: format!("missing {}", layout.relative(&path).display()),
            });
            continue;
        }
        tables.push(storage.read_table(&dir, stem)?);
        runs.push(run);
    }
    Ok((RunStack::new(exp, stem, runs, tables)?, skipped))
}

/// Cellwise mean over runs of every snapshot `<stem>.<k>`, with the runs
/// that contributed.
pub fn heatmap_frames(
    layout: &BatchLayout,
    manifest: &Manifest,
    platform: &PlatformPlugin,
    storage: &Storage,
    exp: usize,
    stem: &str,
) -> Result<(Vec<Matrix>, Vec<usize>)> {
    let (runs, dirs): (Vec<usize>, Vec<_>) = (0..manifest.n_runs)
        .map(|run| (run, layout.run_output_dir(exp, run).join(&platform.output_dir)))
        .filter(|(_, d)| d.is_dir())
        .unzip();
    let Some(first) = dirs.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let count = storage.snapshot_count(first, stem);
    let mut frames = Vec::with_capacity(count);
    for k in 0..count {
        let mats = dirs
            .iter()
            .map(|d| storage.read_snapshot(d, stem, k))
            .collect::<Result<Vec<_>>>()?;
        frames.push(
            mean_matrix(&mats)
                .map_err(|e| Error::Shape(format!("exp{exp} snapshot {stem}.{k}: {e}")))?,
        );
    }
    for d in &dirs[1..] {
        if storage.snapshot_path(d, stem, count).is_file() {
            return Err(Error::Shape(format!(
                "exp{exp}: {} has more {stem} snapshots than {}",
                layout.relative(d).display(),
                layout.relative(first).display()
            )));
        }
    }
    Ok((frames, runs))
}

/// Batch-level summary of one column: each run reduced to a scalar, then
/// distribution statistics across runs per experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub stem: String,
    pub column: String,
    pub reducer: Reducer,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<SummaryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub exp: usize,
    pub row: usize,
    pub col: usize,
    pub stats: CellStats,
}

pub const SUMMARY_HEADER: [&str; 4] = ["exp", "row", "col", "n"];

impl SummaryTable {
    /// `rows × cols` matrix of one statistic, row-major by experiment.
    pub fn matrix(&self, s: Stat) -> Matrix {
        let mut m = vec![vec![f64::NAN; self.cols]; self.rows];
        for e in &self.entries {
            m[e.row][e.col] = e.stats.get(s);
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let mut header: Vec<&str> = SUMMARY_HEADER.to_vec();
        header.extend(Stat::ALL.iter().map(|s| s.id()));
        let mut out = header.join(",");
        out.push('\n');
        for e in &self.entries {
            let mut cells = vec![
                e.exp.to_string(),
                e.row.to_string(),
                e.col.to_string(),
                e.stats.n.to_string(),
            ];
            cells.extend(Stat::ALL.iter().map(|&s| format_cell(e.stats.get(s))));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(stem: &str, column: &str, text: &str, rows: usize, cols: usize) -> Result<Self> {
        let origin = std::path::Path::new(stem);
        let t = DataTable::parse(stem, text, b',', origin)?;
        let idx = |name: &str| t.column_index(name);
        let (ie, ir, ic, inn) = (idx("exp")?, idx("row")?, idx("col")?, idx("n")?);
        let stat_idx: Vec<usize> = Stat::ALL.iter().map(|s| idx(s.id())).collect::<Result<_>>()?;
        let entries = t
            .rows
            .iter()
            .map(|r| {
                let g = |s: Stat| r[stat_idx[Stat::ALL.iter().position(|&x| x == s).unwrap()]];
                SummaryEntry {
                    exp: r[ie] as usize,
                    row: r[ir] as usize,
                    col: r[ic] as usize,
                    stats: CellStats {
                        n: r[inn] as usize,
                        mean: g(Stat::Mean),
                        stddev: g(Stat::Stddev),
                        ci_l95: g(Stat::CiL95),
                        ci_h95: g(Stat::CiH95),
                        min: g(Stat::Min),
                        q1: g(Stat::Q1),
                        median: g(Stat::Median),
                        q3: g(Stat::Q3),
                        max: g(Stat::Max),
                    },
                }
            })
            .collect();
        Ok(SummaryTable {
            stem: stem.into(),
            column: column.into(),
            reducer: Reducer::Final,
            rows,
            cols,
            entries,
        })
    }
}

/// `statistics/collated/<stem>-<column>.csv`
pub fn summary_path(layout: &BatchLayout, stem: &str, column: &str) -> std::path::PathBuf {
    layout.stats_collated().join(format!("{stem}-{column}.csv"))
}

pub fn load_summary(layout: &BatchLayout, manifest: &Manifest, stem: &str, column: &str) -> Result<SummaryTable> {
    let path = summary_path(layout, stem, column);
    let text = fs::read_to_string(&path).at(&path)?;
    SummaryTable::parse_csv(stem, column, &text, manifest.rows, manifest.cols)
}

/// Summary of `stem`/`column` from per-experiment stacks.
pub fn inter_exp_stats(
    manifest: &Manifest,
    stacks: &BTreeMap<usize, RunStack>,
    stem: &str,
    column: &str,
    reducer: Reducer,
) -> Result<SummaryTable> {
    let mut entries = Vec::with_capacity(manifest.cardinality);
    for e in &manifest.experiments {
        let stats = match stacks.get(&e.index) {
            Some(stack) => {
                let idx = stack.tables[0].column_index(column)?;
                cell_stats(stack.tables.iter().map(|t| reducer.apply(t.column(idx))))
            }
            None => cell_stats(std::iter::empty()),
        };
        entries.push(SummaryEntry {
            exp: e.index,
            row: e.row,
            col: e.col,
            stats,
        });
    }
    Ok(SummaryTable {
        stem: stem.into(),
        column: column.into(),
        reducer,
        rows: manifest.rows,
        cols: manifest.cols,
        entries,
    })
}

#[derive(Debug, Clone)]
pub struct StatsOptions {
    pub range: ExpRange,
    pub dist_stats: DistStats,
    pub reducer: Reducer,
    pub storage: Storage,
}

/// Written to `statistics/exp<i>/manifest.yaml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpStatsManifest {
    pub exp: usize,
    pub storage: String,
    pub dist_stats: DistStats,
    pub stems: BTreeMap<String, StemRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemRecord {
    pub runs_used: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs_skipped: Vec<SkippedRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct StatsReport {
    pub experiments: usize,
    pub files_written: usize,
    pub runs_skipped: usize,
}

fn write_csv(path: &std::path::Path, text: String, report: &mut StatsReport) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fsutil::write_atomic(path, text)?;
    report.files_written += 1;
    Ok(())
}

/// Stage 3 over `opts.range`. Collated summaries always span every
/// experiment with readable outputs.
pub fn process_batch(
    layout: &BatchLayout,
    manifest: &Manifest,
    platform: &PlatformPlugin,
    opts: &StatsOptions,
) -> Result<StatsReport> {
    if !layout.exp_outputs().is_dir() {
        return Err(Error::Config(format!(
            "{} does not exist; run stage 2 first",
            layout.exp_outputs().display()
        )));
    }
    let mut report = StatsReport::default();
    let storage = &opts.storage;
    let mut stacks: BTreeMap<String, BTreeMap<usize, RunStack>> = BTreeMap::new();

    for exp in 0..manifest.cardinality {
        let in_range = opts.range.contains(exp);
        let mut record = ExpStatsManifest {
            exp,
            storage: storage.id.clone(),
            dist_stats: opts.dist_stats,
            stems: BTreeMap::new(),
        };
        for stem in &platform.outputs.tables {
            let collated = collate_runs(layout, manifest, platform, storage, exp, stem);
            let (stack, skipped) = match collated {
                Ok(v) => v,
                Err(Error::Shape(msg)) if msg.ends_with("no readable runs") => {
                    log::warn!("{msg}");
                    report.runs_skipped += manifest.n_runs;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if in_range {
                report.runs_skipped += skipped.len();
                let bundle = intra_exp_stats(&stack);
                for s in opts.dist_stats.stats() {
                    let path = layout.stats_exp_dir(exp).join(format!("{stem}.{}.csv", s.id()));
                    write_csv(&path, bundle.table(s).to_csv(), &mut report)?;
                }
                record.stems.insert(
                    stem.clone(),
                    StemRecord {
                        runs_used: stack.runs.clone(),
                        runs_skipped: skipped,
                        frames: None,
                    },
                );
            }
            stacks.entry(stem.clone()).or_default().insert(exp, stack);
        }
        if !in_range {
            continue;
        }
        for stem in &platform.outputs.snapshots {
            let (frames, runs) = heatmap_frames(layout, manifest, platform, storage, exp, stem)?;
            let cols = frames.first().and_then(|f| f.first()).map_or(0, Vec::len);
            let header: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
            for (k, m) in frames.iter().enumerate() {
                let t = DataTable::new(stem.clone(), header.clone(), m.clone());
                let path = layout
                    .stats_exp_dir(exp)
                    .join("frames")
                    .join(format!("{stem}.{k}.csv"));
                write_csv(&path, t.to_csv(), &mut report)?;
            }
            record.stems.insert(
                stem.clone(),
                StemRecord {
                    runs_used: runs,
                    runs_skipped: Vec::new(),
                    frames: Some(frames.len()),
                },
            );
        }
        let dir = layout.stats_exp_dir(exp);
        fs::create_dir_all(&dir).at(&dir)?;
        fsutil::write_yaml(&dir.join("manifest.yaml"), &record)?;
        report.experiments += 1;
    }

    for (stem, by_exp) in &stacks {
        let Some(any) = by_exp.values().next() else {
            continue;
        };
        for column in any.columns().iter().filter(|c| !DataTable::is_index_column(c)) {
            let summary = inter_exp_stats(manifest, by_exp, stem, column, opts.reducer)?;
            write_csv(&summary_path(layout, stem, column), summary.to_csv(), &mut report)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reducers() {
        let v = [1.0, 5.0, f64::NAN, 3.0];
        assert_eq!(Reducer::Final.apply(v.iter().copied()), 3.0);
        assert_eq!(Reducer::Mean.apply(v.iter().copied()), 3.0);
        assert_eq!(Reducer::Max.apply(v.iter().copied()), 5.0);
        assert_eq!(Reducer::Sum.apply(v.iter().copied()), 9.0);
        assert!("median".parse::<Reducer>().is_err());
        assert_eq!("bw".parse::<DistStats>().unwrap(), DistStats::Bw);
    }
}
