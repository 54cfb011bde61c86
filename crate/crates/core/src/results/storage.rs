//! Storage plugins: how run outputs are named and read.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::table::{DataTable, Matrix};
use crate::error::{Error, Result};
use crate::plugin::{PluginPath, PluginType};

pub const CSV_STORAGE_ID: &str = "storage.csv";

/// A delimited-text storage medium. Tables live at
/// `<run>/<output_dir>/<stem>.<ext>`, snapshots at `<stem>.<k>.<ext>`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Storage {
    pub id: String,
    #[serde(default = "default_ext")]
    pub extension: String,
    #[serde(default = "default_delim")]
    pub delimiter: char,
}

fn default_ext() -> String {
    "csv".into()
}

fn default_delim() -> char {
    ','
}

impl Storage {
    pub fn csv() -> Self {
        Storage {
            id: CSV_STORAGE_ID.into(),
            extension: default_ext(),
            delimiter: default_delim(),
        }
    }

    /// Built-ins first, then `storage` plugins on the plugin path.
    pub fn resolve(id: &str, plugin_path: &PluginPath) -> Result<Self> {
        if id == CSV_STORAGE_ID {
            return Ok(Self::csv());
        }
        let found = plugin_path.find(PluginType::Storage, id)?.ok_or_else(|| {
            Error::Plugin(format!(
                "no storage plugin '{id}' (built-in: {CSV_STORAGE_ID}; searched {})",
                plugin_path.describe()
            ))
        })?;
        let s: Storage = found.load()?;
        if !s.delimiter.is_ascii() {
            return Err(Error::Plugin(format!("storage plugin '{id}': delimiter must be ASCII")));
        }
        Ok(s)
    }

    pub fn table_path(&self, out_dir: &Path, stem: &str) -> PathBuf {
        out_dir.join(format!("{stem}.{}", self.extension))
    }

    pub fn snapshot_path(&self, out_dir: &Path, stem: &str, k: usize) -> PathBuf {
        out_dir.join(format!("{stem}.{k}.{}", self.extension))
    }

    pub fn read_table(&self, out_dir: &Path, stem: &str) -> Result<DataTable> {
        DataTable::read(stem, &self.table_path(out_dir, stem), self.delimiter as u8)
    }

    pub fn read_snapshot(&self, out_dir: &Path, stem: &str, k: usize) -> Result<Matrix> {
        let t = DataTable::read(stem, &self.snapshot_path(out_dir, stem, k), self.delimiter as u8)?;
        Ok(t.rows)
    }

    /// Number of consecutive snapshots `0..k` present.
    pub fn snapshot_count(&self, out_dir: &Path, stem: &str) -> usize {
        (0..)
            .take_while(|&k| self.snapshot_path(out_dir, stem, k).is_file())
            .count()
    }
}
