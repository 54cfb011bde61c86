//! Stage 1: experiment generation.

mod generate;
mod layout;
mod seeds;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_batch, ExtraChanges, GenerateRequest};
pub use layout::{AxisInfo, BatchLayout, ExperimentEntry, Manifest, MANIFEST_FORMAT};
pub use seeds::{assign_seeds, derive_seed, SeedTable, SEEDS_FILE};

/// Experiment length and controller rate from `--exp-setup`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpSetup {
    pub duration_s: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_hz: Option<u32>,
}

impl ExpSetup {
    /// Parses `exp_setup.T<seconds>[.K<hz>]`.
    pub fn parse(token: &str) -> Result<Self> {
        let err = |msg: &str| Error::ExpSetup {
            token: token.to_string(),
            msg: msg.to_string(),
        };
        let rest = token
            .strip_prefix("exp_setup.")
            .ok_or_else(|| err("must start with 'exp_setup.'"))?;
        let mut duration = None;
        let mut hz = None;
        for seg in rest.split('.') {
            if let Some(v) = seg.strip_prefix('T') {
                let v: u64 = v.parse().map_err(|_| err("T must be followed by an integer"))?;
                if v == 0 {
                    return Err(err("duration must be at least 1 second"));
                }
                duration = Some(v);
            } else if let Some(v) = seg.strip_prefix('K') {
                let v: u32 = v.parse().map_err(|_| err("K must be followed by an integer"))?;
                if v == 0 {
                    return Err(err("controller rate must be at least 1 Hz"));
                }
                hz = Some(v);
            } else {
                return Err(err(&format!("unknown segment '{seg}'")));
            }
        }
        Ok(ExpSetup {
            duration_s: duration.ok_or_else(|| err("duration (T<seconds>) is required"))?,
            controller_hz: hz,
        })
    }

    pub fn token(&self) -> String {
        match self.controller_hz {
            Some(hz) => format!("exp_setup.T{}.K{hz}", self.duration_s),
            None => format!("exp_setup.T{}", self.duration_s),
        }
    }
}
