//! Core of `xbatch`: turns batch-criteria queries into experiment inputs,
//! dispatches runs on an execution environment, summarizes outputs and
//! renders graph documents.
//!
//! Pipeline stages map to modules:
//!
//! 1. [`expgen`]: inputs, seeds and the batch manifest
//! 2. [`exec`]: command files and dispatch
//! 3. [`results`]: per-experiment and batch-level statistics
//! 4. [`deliverables`]: plot documents, SVG and video commands
//! 5. [`compare`]: combining deliverables across batches

pub mod compare;
pub mod criteria;
pub mod deliverables;
pub mod error;
pub mod exec;
pub mod expgen;
pub mod fsutil;
pub mod platform;
pub mod refplat;
pub mod results;
pub mod plugin;
pub mod project;
pub mod xml;

pub use criteria::{
    expand_grid, tokenize_cli_criteria, BatchCriteria, CriterionDef, CriterionKind, CriterionSpec,
    ExperimentPoint, ParserRegistry, ValuePoint,
};
pub use error::{Error, Result};
pub use expgen::{BatchLayout, ExpSetup, Manifest, SeedTable};
pub use compare::{compare, validate_comparability, CompareMode, ComparisonSpec};
pub use deliverables::{generate_deliverables, GraphConfig, PlotDocument};
pub use exec::{run_batch, ExecEnvAdapter, ExpRange};
pub use platform::{resolve_platform, PlatformPlugin};
pub use project::Project;
pub use results::{process_batch, DataTable, DistStats, Reducer, RunStack, StatsBundle};
pub use plugin::PluginPath;
pub use xml::{AttributeChangeSet, Change, XmlTree};
