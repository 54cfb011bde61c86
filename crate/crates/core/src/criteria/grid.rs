use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BatchCriteria;
use crate::error::{Error, Result};
use crate::xml::AttributeChangeSet;

/// One experiment of a batch: its grid position and merged changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentPoint {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub labels: Vec<String>,
    pub changes: AttributeChangeSet,
}

/// Flattens the criteria into experiments, row-major for bivariate batches.
///
/// Axis A changes come before axis B changes. Two axes writing the same
/// attribute (or text) with different values is an error.
pub fn expand_grid(criteria: &BatchCriteria) -> Result<Vec<ExperimentPoint>> {
    let (rows, cols) = criteria.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for (row, a) in criteria.axis_a.values.iter().enumerate() {
        for col in 0..cols {
            let mut changes = a.changes.clone();
            let mut labels = vec![a.label.clone()];
            if let Some(axis_b) = &criteria.axis_b {
                let b = &axis_b.values[col];
                check_conflicts(&a.changes, &b.changes)?;
                changes.extend(&b.changes);
                labels.push(b.label.clone());
            }
            out.push(ExperimentPoint {
                index: row * cols + col,
                row,
                col,
                labels,
                changes,
            });
        }
    }
    Ok(out)
}

fn check_conflicts(first: &AttributeChangeSet, second: &AttributeChangeSet) -> Result<()> {
    let mut writes = BTreeMap::new();
    for c in first.iter() {
        if let Some((key, value)) = c.write_key()? {
            writes.insert(key, value);
        }
    }
    for c in second.iter() {
        if let Some((key, value)) = c.write_key()? {
            if let Some(prev) = writes.get(&key) {
                if *prev != value {
                    return Err(Error::Conflict {
                        path: key,
                        first: prev.clone(),
                        second: value,
                    });
                }
            }
        }
    }
    Ok(())
}
