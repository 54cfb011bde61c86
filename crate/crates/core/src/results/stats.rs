//! Cellwise distribution statistics across runs.
//!
//! Conventions: sample standard deviation (n−1, zero for one value),
//! normal-approximation 95% interval `mean ± 1.96·sd/√n`, and quantiles
//! by linear interpolation between closest ranks (`h = (n−1)p`). NaN
//! cells are missing and skipped; a cell with no values is NaN.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::table::{DataTable, Matrix};
use crate::error::{Error, Result};

pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stat {
    #[serde(rename = "mean")]
    Mean,
    #[serde(rename = "stddev")]
    Stddev,
    #[serde(rename = "ciL95")]
    CiL95,
    #[serde(rename = "ciH95")]
    CiH95,
    #[serde(rename = "min")]
    Min,
    #[serde(rename = "q1")]
    Q1,
    #[serde(rename = "median")]
    Median,
    #[serde(rename = "q3")]
    Q3,
    #[serde(rename = "max")]
    Max,
}

impl Stat {
    pub const ALL: [Stat; 9] = [
        Stat::Mean,
        Stat::Stddev,
        Stat::CiL95,
        Stat::CiH95,
        Stat::Min,
        Stat::Q1,
        Stat::Median,
        Stat::Q3,
        Stat::Max,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Stddev => "stddev",
            Stat::CiL95 => "ciL95",
            Stat::CiH95 => "ciH95",
            Stat::Min => "min",
            Stat::Q1 => "q1",
            Stat::Median => "median",
            Stat::Q3 => "q3",
            Stat::Max => "max",
        }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// `--dist-stats`: which statistics are written besides the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistStats {
    #[default]
    Conf95,
    Bw,
    All,
}

impl DistStats {
    pub fn stats(self) -> Vec<Stat> {
        use Stat::*;
        match self {
            DistStats::Conf95 => vec![Mean, Stddev, CiL95, CiH95],
            DistStats::Bw => vec![Mean, Min, Q1, Median, Q3, Max],
            DistStats::All => Stat::ALL.to_vec(),
        }
    }
}

impl FromStr for DistStats {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conf95" => Ok(DistStats::Conf95),
            "bw" => Ok(DistStats::Bw),
            "all" => Ok(DistStats::All),
            other => Err(Error::Usage(format!(
                "--dist-stats must be conf95, bw or all, got '{other}'"
            ))),
        }
    }
}

/// All statistics of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    pub ci_l95: f64,
    pub ci_h95: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl CellStats {
    pub fn get(&self, s: Stat) -> f64 {
        match s {
            Stat::Mean => self.mean,
            Stat::Stddev => self.stddev,
            Stat::CiL95 => self.ci_l95,
            Stat::CiH95 => self.ci_h95,
            Stat::Min => self.min,
            Stat::Q1 => self.q1,
            Stat::Median => self.median,
            Stat::Q3 => self.q3,
            Stat::Max => self.max,
        }
    }
}

/// Quantile of sorted values, linear interpolation between closest ranks.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn cell_stats(values: impl IntoIterator<Item = f64>) -> CellStats {
    let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
    let n = v.len();
    if n == 0 {
        let nan = f64::NAN;
        return CellStats {
            n,
            mean: nan,
            stddev: nan,
            ci_l95: nan,
            ci_h95: nan,
            min: nan,
            q1: nan,
            median: nan,
            q3: nan,
            max: nan,
        };
    }
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / n as f64;
    let stddev = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = Z95 * stddev / (n as f64).sqrt();
    CellStats {
        n,
        mean,
        stddev,
        ci_l95: mean - half,
        ci_h95: mean + half,
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[n - 1],
    }
}

/// Tables of one output stem from every usable run of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStack {
    pub exp: usize,
    pub stem: String,
    /// Run index of each table.
    pub runs: Vec<usize>,
    pub tables: Vec<DataTable>,
}

impl RunStack {
    /// Checks that every table has the first table's columns and shape.
    pub fn new(exp: usize, stem: &str, runs: Vec<usize>, tables: Vec<DataTable>) -> Result<Self> {
        let Some(first) = tables.first() else {
            return Err(Error::Shape(format!("exp{exp}/{stem}: no readable runs")));
        };
        for (run, t) in runs.iter().zip(&tables) {
            if t.columns != first.columns {
                return Err(Error::Shape(format!(
                    "exp{exp}/{stem}: run{run} has columns [{}], run{} has [{}]",
                    t.columns.join(","),
                    runs[0],
                    first.columns.join(",")
                )));
            }
            if t.shape() != first.shape() {
                return Err(Error::Shape(format!(
                    "exp{exp}/{stem}: run{run} has {} rows, run{} has {}",
                    t.rows.len(),
                    runs[0],
                    first.rows.len()
                )));
            }
        }
        Ok(RunStack {
            exp,
            stem: stem.to_string(),
            runs,
            tables,
        })
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn columns(&self) -> &[String] {
        &self.tables[0].columns
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tables[0].shape()
    }
}

/// Cellwise statistics; each matrix has the run tables' shape.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsBundle {
    pub stem: String,
    pub columns: Vec<String>,
    pub stats: BTreeMap<Stat, Matrix>,
}

impl StatsBundle {
    pub fn get(&self, s: Stat) -> &Matrix {
        &self.stats[&s]
    }

    pub fn table(&self, s: Stat) -> DataTable {
        DataTable::new(
            format!("{}.{}", self.stem, s.id()),
            self.columns.clone(),
            self.stats[&s].clone(),
        )
    }
}

pub fn intra_exp_stats(stack: &RunStack) -> StatsBundle {
    let (rows, cols) = stack.shape();
    let mut stats: BTreeMap<Stat, Matrix> = Stat::ALL
        .iter()
        .map(|&s| (s, vec![vec![0.0; cols]; rows]))
        .collect();
    for r in 0..rows {
        for c in 0..cols {
            let cs = cell_stats(stack.tables.iter().map(|t| t.rows[r][c]));
            for (s, m) in stats.iter_mut() {
                m[r][c] = cs.get(*s);
            }
        }
    }
    StatsBundle {
        stem: stack.stem.clone(),
        columns: stack.columns().to_vec(),
        stats,
    }
}

/// Cellwise mean of equally shaped matrices.
pub fn mean_matrix(mats: &[Matrix]) -> Result<Matrix> {
    let Some(first) = mats.first() else {
        return Err(Error::Shape("no matrices to average".into()));
    };
    let shape = |m: &Matrix| (m.len(), m.first().map_or(0, Vec::len));
    for (i, m) in mats.iter().enumerate() {
        if shape(m) != shape(first) || m.iter().any(|r| r.len() != first[0].len()) {
            return Err(Error::Shape(format!(
                "matrix {i} is {:?}, expected {:?}",
                shape(m),
                shape(first)
            )));
        }
    }
    Ok((0..first.len())
        .map(|r| {
            (0..first[0].len())
                .map(|c| cell_stats(mats.iter().map(|m| m[r][c])).mean)
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn worked_examples() {
        let s = cell_stats([1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.stddev, 1.0);
        assert!((s.ci_h95 - s.mean - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        let s = cell_stats([1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        let s = cell_stats([7.5]);
        assert_eq!((s.stddev, s.ci_l95, s.ci_h95), (0.0, 7.5, 7.5));
        let s = cell_stats([f64::NAN, 4.0, 2.0]);
        assert_eq!((s.n, s.mean), (2, 3.0));
        assert!(cell_stats([f64::NAN]).mean.is_nan());
    }

    #[test]
    fn heatmap_mean_example() {
        let m = mean_matrix(&[
            vec![vec![0.0, 2.0], vec![4.0, 6.0]],
            vec![vec![2.0, 2.0], vec![4.0, 6.0]],
            vec![vec![4.0, 2.0], vec![4.0, 6.0]],
        ])
        .unwrap();
        assert_eq!(m, vec![vec![2.0, 2.0], vec![4.0, 6.0]]);
        assert!(mean_matrix(&[vec![vec![1.0]], vec![vec![1.0, 2.0]]]).is_err());
    }

    #[test]
    fn stack_shape_checks() {
        let t = |cols: &[&str], rows: usize| {
            DataTable::new("s", cols.iter().map(|c| c.to_string()).collect(), vec![vec![0.0; cols.len()]; rows])
        };
        assert!(RunStack::new(0, "s", vec![0, 1], vec![t(&["a"], 2), t(&["a"], 2)]).is_ok());
        let e = RunStack::new(0, "s", vec![0, 3], vec![t(&["a"], 2), t(&["b"], 2)]).unwrap_err();
        assert!(e.to_string().contains("run3"));
        assert!(RunStack::new(0, "s", vec![0, 1], vec![t(&["a"], 2), t(&["a"], 3)]).is_err());
        assert!(RunStack::new(0, "s", vec![], vec![]).is_err());
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 1..17)
    }

    proptest! {
        #[test]
        fn ordering_invariants(v in sample()) {
            let s = cell_stats(v);
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.ci_l95 <= s.mean && s.mean <= s.ci_h95);
        }

        #[test]
        fn permutation_invariance(v in sample(), seed: u64) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut w = v.clone();
            w.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (a, b) = (cell_stats(v), cell_stats(w));
            for s in Stat::ALL {
                prop_assert!(close(a.get(s), b.get(s)), "{s}: {} vs {}", a.get(s), b.get(s));
            }
        }

        #[test]
        fn scaling_equivariance(v in sample(), c in 0.01f64..100.0) {
            let a = cell_stats(v.iter().copied());
            let b = cell_stats(v.iter().map(|x| x * c));
            for s in Stat::ALL {
                prop_assert!(close(a.get(s) * c, b.get(s)), "{s}");
            }
        }
    }
}
