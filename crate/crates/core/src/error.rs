use std::io;
use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("no parser for criterion '{0}'")]
    NoParser(String),

    #[error("cannot parse criterion '{token}' at offset {offset}: {msg}")]
    CriterionParse {
        token: String,
        offset: usize,
        msg: String,
    },

    #[error("conflicting writes to {path}: '{first}' vs '{second}'")]
    Conflict {
        path: String,
        first: String,
        second: String,
    },

    #[error("XML parse error at line {line}, column {column}: {msg}")]
    XmlParse {
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("change #{index} ({op}): path '{path}' does not resolve")]
    UnresolvedPath {
        index: usize,
        op: &'static str,
        path: String,
    },

    #[error("invalid element path '{0}'")]
    BadPath(String),

    #[error("invalid experiment setup '{token}': {msg}")]
    ExpSetup { token: String, msg: String },

    #[error(
        "seeds file {path} holds {found_exps}x{found_runs} seeds but the batch needs \
         {exps}x{runs}; pass --force-regen to regenerate it"
    )]
    SeedMismatch {
        path: PathBuf,
        found_exps: usize,
        found_runs: usize,
        exps: usize,
        runs: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid experiment range '{range}': {msg}")]
    Range { range: String, msg: String },

    #[error("experiment {exp}: missing run directories {missing:?}")]
    MissingRuns { exp: usize, missing: Vec<usize> },

    #[error("plugin error: {0}")]
    Plugin(String),

    #[error("data error in {path}: {msg}")]
    Data { path: PathBuf, msg: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown column '{column}' (available: {})", available.join(", "))]
    UnknownColumn {
        column: String,
        available: Vec<String>,
    },

    #[error("plot error: {0}")]
    Plot(String),

    #[error("comparison error: {0}")]
    Compare(String),

    #[error("simulation config error: {0}")]
    Sim(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {source}")]
    Yaml {
        path: PathBuf,
        #[source]
        source: serde_yaml::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn yaml(path: impl AsRef<Path>, source: serde_yaml::Error) -> Self {
        Error::Yaml {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn data(path: impl AsRef<Path>, msg: impl Into<String>) -> Self {
        Error::Data {
            path: path.as_ref().to_path_buf(),
            msg: msg.into(),
        }
    }
}

/// Attaches a path to `io::Result`s.
pub trait IoContext<T> {
    fn at(self, path: impl AsRef<Path>) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl AsRef<Path>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
