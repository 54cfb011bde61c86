use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

pub const SEEDS_FILE: &str = "seeds.yaml";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` in experiment `exp`.
///
/// The counter `(exp << 32 | run) + 1` is spread by the odd golden-ratio
/// constant, offset by the master seed and passed through the splitmix64
/// finalizer. Every step is a bijection on u64, so seeds are distinct for
/// all `exp, run < 2^32`.
pub fn derive_seed(master: u64, exp: usize, run: usize) -> u64 {
    let counter = ((exp as u64) << 32 | run as u64).wrapping_add(1);
    splitmix_finalize(master.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
}

/// Per-run seeds of a batch, persisted as `seeds.yaml` at the batch root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTable {
    pub master_seed: u64,
    pub n_experiments: usize,
    pub n_runs: usize,
    /// `seeds[exp][run]`.
    pub seeds: Vec<Vec<u64>>,
}

impl SeedTable {
    pub fn generate(master_seed: u64, n_experiments: usize, n_runs: usize) -> Self {
        let seeds = (0..n_experiments)
            .map(|e| (0..n_runs).map(|r| derive_seed(master_seed, e, r)).collect())
            .collect();
        SeedTable {
            master_seed,
            n_experiments,
            n_runs,
            seeds,
        }
    }

    pub fn seed(&self, exp: usize, run: usize) -> u64 {
        self.seeds[exp][run]
    }

    pub fn load(path: &Path) -> Result<Self> {
        let table: SeedTable = fsutil::read_yaml(path)?;
        let consistent = table.seeds.len() == table.n_experiments
            && table.seeds.iter().all(|r| r.len() == table.n_runs);
        if !consistent {
            return Err(Error::data(path, "seed table dimensions do not match its header"));
        }
        Ok(table)
    }

    pub fn to_yaml(&self) -> Result<String> {
        fsutil::to_yaml(self)
    }

    /// Loads `path` when it exists (and `force_regen` is off), else
    /// generates a fresh table. The flag tells whether the table was reused.
    pub fn resolve(
        path: &Path,
        master_seed: u64,
        n_experiments: usize,
        n_runs: usize,
        force_regen: bool,
    ) -> Result<(SeedTable, bool)> {
        if path.exists() && !force_regen {
            let table = Self::load(path)?;
            if table.n_experiments != n_experiments || table.n_runs != n_runs {
                return Err(Error::SeedMismatch {
                    path: path.to_path_buf(),
                    found_exps: table.n_experiments,
                    found_runs: table.n_runs,
                    exps: n_experiments,
                    runs: n_runs,
                });
            }
            if table.master_seed != master_seed {
                log::warn!(
                    "reusing seeds from {} (master seed {}); pass --force-regen to regenerate",
                    path.display(),
                    table.master_seed
                );
            }
            return Ok((table, true));
        }
        Ok((Self::generate(master_seed, n_experiments, n_runs), false))
    }
}

/// Resolves the seed table for a batch root and writes it if it is new.
pub fn assign_seeds(
    root: &Path,
    master_seed: u64,
    cardinality: usize,
    n_runs: usize,
    force_regen: bool,
) -> Result<SeedTable> {
    if cardinality == 0 || n_runs == 0 {
        return Err(Error::Usage("a batch needs at least one experiment and one run".into()));
    }
    let path = root.join(SEEDS_FILE);
    let (table, reused) = SeedTable::resolve(&path, master_seed, cardinality, n_runs, force_regen)?;
    if !reused {
        fsutil::write_atomic(&path, table.to_yaml()?)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::fs;

    #[test]
    fn deterministic() {
        assert_eq!(derive_seed(42, 3, 1), derive_seed(42, 3, 1));
        assert_ne!(derive_seed(42, 3, 1), derive_seed(43, 3, 1));
    }

    #[test]
    fn eight_by_three_distinct() {
        let t = SeedTable::generate(0, 8, 3);
        let all: HashSet<u64> = t.seeds.iter().flatten().copied().collect();
        assert_eq!(all.len(), 24);
    }

    #[test]
    fn reuse_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let first = assign_seeds(tmp.path(), 7, 4, 2, false).unwrap();
        let bytes = fs::read(tmp.path().join(SEEDS_FILE)).unwrap();
        let second = assign_seeds(tmp.path(), 999, 4, 2, false).unwrap();
        assert_eq!(first, second);
        assert_eq!(bytes, fs::read(tmp.path().join(SEEDS_FILE)).unwrap());
    }

    #[test]
    fn mismatch_requires_force() {
        let tmp = tempfile::tempdir().unwrap();
        assign_seeds(tmp.path(), 7, 4, 2, false).unwrap();
        let err = assign_seeds(tmp.path(), 7, 4, 3, false).unwrap_err().to_string();
        assert!(err.contains("--force-regen"), "{err}");
        let t = assign_seeds(tmp.path(), 8, 4, 3, true).unwrap();
        assert_eq!(t.n_runs, 3);
        assert_eq!(SeedTable::load(&tmp.path().join(SEEDS_FILE)).unwrap(), t);
    }

    #[test]
    fn zero_sized_batch_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(assign_seeds(tmp.path(), 1, 0, 1, false).is_err());
    }
}
